use mrbcra::analysis::{solve_lambda1, unsuccessful_mean};
use mrbcra::csmud::generate_codebook;
use mrbcra::sim::*;
use mrbcra::SystemConfig;

fn cfg(lambda: f64, slots: usize) -> SystemConfig {
    SystemConfig { lambda, slots, ..SystemConfig::default() }
}

#[test]
fn packets_are_conserved() {
    let c = cfg(13.0, 2000);
    let m = run(&c, Mode::Abstract, 200).unwrap();
    let mut carried = 0usize;
    for r in &m.trace {
        assert_eq!(r.arrivals_offered, r.arrivals_admitted + r.arrivals_blocked);
        assert_eq!(r.transmitted, carried + r.arrivals_admitted);
        assert_eq!(r.transmitted, r.successful + r.collided_or_failed);
        assert_eq!(r.carried, r.collided_or_failed);
        assert_eq!(r.per_rb.iter().map(|x| x.k).sum::<usize>(), r.transmitted);
        carried = r.carried;
    }
}

#[test]
fn rate_control_gates_on_previous_slot() {
    let c = SystemConfig { Kbar: 30, ..cfg(16.0, 1500) };
    let mut state = BacklogState::empty(c.M);
    state.push_packets(0, 40);
    state.push_packets(3, 10);
    let mut prev: Option<SlotRecord> = None;
    for _ in 0..c.slots {
        let (next, rec) = step_abstract(&state, &c);
        if let Some(p) = &prev {
            let expected = p.per_rb.iter().filter(|x| x.k > c.Kbar).count();
            assert_eq!(rec.rate_control_active, expected);
            if expected == 0 {
                assert_eq!(rec.arrivals_blocked, 0);
            }
        } else {
            assert_eq!(rec.rate_control_active, 0);
        }
        assert_eq!(blocked_rbs(&next).len(), rec.per_rb.iter().filter(|x| x.k > c.Kbar).count());
        prev = Some(rec);
        state = next;
    }
}

#[test]
fn everything_fails_above_d() {
    let c = cfg(0.0, 10);
    let mut s = BacklogState::empty(c.M);
    s.push_packets(2, c.D + 1);
    s.push_packets(5, 3);
    let (next, rec) = step_abstract(&s, &c);
    assert_eq!(rec.per_rb[2].successes, 0);
    assert_eq!(rec.per_rb[2].failures, c.D + 1);
    assert!(rec.per_rb[5].successes >= 1);
    assert_eq!(next.backlog(), rec.collided_or_failed);
    assert!(next.packets.iter().all(|p| p.attempts == 1 && p.sc.is_some()));
}

#[test]
fn parallel_and_sequential_runs_agree() {
    let c = SystemConfig { L: 8, N: 64, M: 4, T: 40, D: 6, Kbar: 16, lambda: 4.0, slots: 60, ..SystemConfig::default() };
    for mode in [Mode::Abstract, Mode::Phy] {
        let seq = run_with(&c, mode, &SimOptions { warmup_slots: 10, parallel: false, ..SimOptions::for_config(&c) }).unwrap();
        let par = run_with(&c, mode, &SimOptions { warmup_slots: 10, parallel: true, ..SimOptions::for_config(&c) }).unwrap();
        assert_eq!(seq.trace, par.trace, "{mode}");
    }
    let a = run_aloha_with(&c, true, &SimOptions { warmup_slots: 10, parallel: false, ..SimOptions::for_config(&c) }).unwrap();
    let b = run_aloha_with(&c, true, &SimOptions { warmup_slots: 10, parallel: true, ..SimOptions::for_config(&c) }).unwrap();
    assert_eq!(a.trace, b.trace);
}

#[test]
fn seeds_change_sample_paths() {
    let a = run(&cfg(10.0, 300), Mode::Abstract, 100).unwrap();
    let b = run(&SystemConfig { seed: 2, ..cfg(10.0, 300) }, Mode::Abstract, 100).unwrap();
    assert_ne!(a.trace, b.trace);
}

#[test]
fn single_slot_failures_match_the_closed_form() {
    // Fresh packets only: failures in an RB with K packets average U(K).
    let c = cfg(0.0, 10);
    for k in [5usize, 15, 25, 26] {
        let trials = 4000;
        let mut fails = 0usize;
        for t in 0..trials {
            let cc = SystemConfig { seed: t as u64, ..c };
            let mut s = BacklogState::empty(cc.M);
            s.push_packets(0, k);
            let (_, rec) = step_abstract(&s, &cc);
            fails += rec.per_rb[0].failures;
        }
        let mean = fails as f64 / trials as f64;
        let want = unsuccessful_mean(k, c.N, c.D);
        assert!((mean - want).abs() < 0.1 + 0.05 * want, "K={k}: {mean} vs {want}");
    }
}

#[test]
fn light_load_tracks_the_steady_state() {
    let c = cfg(12.0, 20_000);
    let m = run(&c, Mode::Abstract, 2000).unwrap();
    let s = solve_lambda1(12.0, c.N, c.D, 1e-12).unwrap();
    assert!((m.mean_k_per_rb / s.lambda1 - 1.0).abs() < 0.05, "{} vs {}", m.mean_k_per_rb, s.lambda1);
    assert!((m.normalized_delay / s.delay - 1.0).abs() < 0.05);
    assert!((m.throughput_per_rb / 12.0 - 1.0).abs() < 0.02);
    assert_eq!(m.blocked_fraction, 0.0);
}

#[test]
fn delay_identity_holds_without_blocking() {
    // Transmissions per success = mean attempts per delivered packet.
    let c = cfg(10.0, 5000);
    let m = run(&c, Mode::Abstract, 500).unwrap();
    let measured = &m.trace[500..];
    let tx: usize = measured.iter().map(|r| r.transmitted).sum();
    let ok: usize = measured.iter().map(|r| r.successful).sum();
    assert!((m.normalized_delay - tx as f64 / ok as f64).abs() < 1e-12);
    // Each retransmission takes exactly one slot, so attempts and slots in system coincide.
    assert!((m.mean_packet_delay_slots / m.normalized_delay - 1.0).abs() < 0.02);
}

#[test]
fn idle_system_reports_unit_delay() {
    let m = run(&cfg(0.0, 300), Mode::Abstract, 100).unwrap();
    assert_eq!(m.throughput_per_rb, 0.0);
    assert_eq!(m.normalized_delay, 1.0);
}

#[test]
fn controlled_aloha_stays_below_its_capacity() {
    let c = cfg(32.0, 6000);
    let m = run_aloha(&c, true).unwrap();
    let cap = 32.0 / std::f64::consts::E;
    assert!(m.throughput_per_rb <= cap + 3.0 * m.throughput_stderr, "{}", m.throughput_per_rb);
    assert!(m.throughput_per_rb > 0.8 * cap);
    assert!(m.trace.iter().any(|r| r.deferred > 0));
}

#[test]
fn uncontrolled_aloha_is_orthogonal_at_light_load() {
    let c = cfg(2.0, 3000);
    let m = run_aloha(&c, false).unwrap();
    assert!((m.throughput_per_rb - 2.0).abs() < 0.1);
    assert!(m.trace.iter().all(|r| r.deferred == 0));
}

#[test]
fn phy_step_decodes_light_loads() {
    let c = SystemConfig { L: 16, N: 64, M: 2, T: 200, D: 10, Kbar: 32, lambda: 0.0, snr_db: 20.0, slots: 1, seed: 3 };
    let cb = generate_codebook(c.L, c.N, c.seed).unwrap();
    let mut s = BacklogState::empty(c.M);
    s.push_packets(0, 3);
    let opts = SimOptions::for_config(&c);
    let (next, rec) = step_phy(&s, &c, &cb, &opts).unwrap();
    assert_eq!(rec.transmitted, 3);
    assert_eq!(rec.successful + rec.collided_or_failed, 3);
    assert_eq!(next.backlog(), rec.collided_or_failed);
    // Any failure at K=3 can only be a code collision.
    if rec.collided_or_failed > 0 {
        let codes: Vec<_> = next.packets.iter().map(|p| p.sc.unwrap()).collect();
        assert!(codes.len() >= 2);
    }
    let wrong = generate_codebook(8, 64, 1).unwrap();
    assert!(step_phy(&s, &c, &wrong, &opts).is_err());
}

#[test]
fn drift_is_negative_in_the_interior() {
    let c = SystemConfig { lambda: 15.0, ..SystemConfig::default() };
    let t = drift_probe(&c, Mode::Abstract, 4000).unwrap();
    assert!(t.interior.mean_drift < 0.0);
    assert!(t.interior.mean_drift >= t.interior.bound - 4.0 * t.interior.stderr);
    // With K_m uniform on {24, 25}: M (lambda - E[K (1 - 1/N)^{K-1}]).
    let g = |k: f64| k * (1.0 - 1.0 / 320.0f64).powf(k - 1.0);
    let want = 8.0 * (15.0 - 0.5 * (g(24.0) + g(25.0)));
    assert!((t.interior.mean_drift - want).abs() < 4.0 * t.interior.stderr + 0.05, "{} vs {want}", t.interior.mean_drift);
    assert!(t.complement.mean_drift <= t.complement.bound + 4.0 * t.complement.stderr);
    assert!(matches!(drift_probe(&c, Mode::Abstract, 10), Err(mrbcra::Error::InsufficientSamples(_))));
}

#[test]
fn complexity_grows_quadratically_in_l() {
    let j = 512;
    let small = complexity_model(16, j / 16, 10.0, 2.0);
    let large = complexity_model(128, j / 128, 10.0, 2.0);
    assert!((large / small - (2.0 * 128.0 + 10.0) / (2.0 * 16.0 + 10.0)).abs() < 1e-12);
}

#[test]
fn overload_grows_to_the_rate_control_ceiling() {
    let c = cfg(20.0, 10_000);
    let m = run(&c, Mode::Abstract, 1000).unwrap();
    assert!(m.blocked_fraction > 0.0);
    let first = m.trace.iter().position(|r| r.rate_control_active > 0).expect("rate control engages");
    let late = m.trace[9800..].iter().map(|r| r.carried).sum::<usize>() as f64 / 200.0;
    assert!(late > (c.M * c.Kbar) as f64, "{late}");
    assert!(m.trace[first..].iter().map(|r| r.carried).max().unwrap() >= m.trace[..first.max(1)].iter().map(|r| r.carried).max().unwrap());
    assert!(m.trace[9800..].iter().all(|r| r.rate_control_active > 0));
}

#[test]
fn uncontrolled_aloha_respects_the_orthogonal_cap() {
    let m = run_aloha(&cfg(32.0, 5000), false).unwrap();
    assert!(m.throughput_per_rb <= 32.0 / std::f64::consts::E);
}

#[test]
fn complexity_examples() {
    assert_eq!(complexity_model(32, 8, 10.0, 2.0), 18944.0);
    assert!(complexity_model(512, 1, 8.0, 2.0) > complexity_model(32, 16, 8.0, 2.0));
    let base = complexity_model(32, 8, 10.0, 2.0);
    assert_eq!(complexity_model(32, 8, 10.0, 4.0) - base, 8.0 * 2.0 * 1024.0);
}

#[test]
fn no_arrivals_means_no_upward_drift() {
    let t = drift_probe(&cfg(0.0, 10), Mode::Abstract, 2000).unwrap();
    assert!(t.interior.mean_drift <= 0.0);
    assert!(t.complement.mean_drift <= 0.0);
}
