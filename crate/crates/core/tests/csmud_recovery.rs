use mrbcra::csmud::*;
use mrbcra::rng::{derive_stream, Purpose};
use mrbcra::SystemConfig;

fn rb_cfg(l: usize, n: usize, t: usize, snr_db: f64) -> SystemConfig {
    SystemConfig { L: l, N: n, T: t, D: l - 1, Kbar: 2 * l, snr_db, ..SystemConfig::default() }
}

#[test]
fn noiseless_sparse_block_is_recovered_exactly() {
    let c = rb_cfg(32, 256, 64, 300.0);
    let cb = generate_codebook(32, 256, 5).unwrap();
    let active: Vec<(u64, usize)> = [3usize, 17, 90, 140, 255].iter().enumerate().map(|(i, &s)| (i as u64, s)).collect();
    let mut rng = derive_stream(5, Purpose::Phy, 0, 0);
    let obs = synthesize_rb(&SystemConfig { snr_db: 300.0, ..c }, &cb, &active, &mut rng).unwrap();
    let res = somp_recover(&obs.y, &cb, 31, DEFAULT_STOP_FACTOR, 0.0).unwrap();
    assert_eq!(res.support_set(), active.iter().map(|a| a.1).collect());
    assert!(res.residual_energy < 1e-18 * obs.y.iter().map(|v| v.norm_sqr()).sum::<f64>());
    let err: f64 = (&res.s_hat - &obs.s_true).iter().map(|v| v.norm_sqr()).sum();
    assert!(err < 1e-16, "{err}");
    assert_eq!(evaluate_recovery(&obs, &res).unsuccessful, 0);
}

#[test]
fn reconstruction_reproduces_the_observation() {
    let c = rb_cfg(16, 64, 30, 10.0);
    let cb = generate_codebook(16, 64, 9).unwrap();
    let active = vec![(0u64, 4usize), (1, 4), (2, 33)];
    let mut rng = derive_stream(1, Purpose::Phy, 2, 3);
    let obs = synthesize_rb(&c, &cb, &active, &mut rng).unwrap();
    let diff: f64 = (obs.reconstruct(&cb) - &obs.y).iter().map(|v| v.norm_sqr()).sum();
    assert!(diff < 1e-20);
    // Collided code rows carry the sum of two unit symbols.
    assert!(obs.s_true.row(4).iter().any(|v| (v.norm() - 1.0).abs() > 1e-6));
}

#[test]
fn residual_energy_is_monotone_and_stops_near_noise() {
    let c = rb_cfg(32, 256, 640, 20.0);
    let cb = generate_codebook(32, 256, 2).unwrap();
    let active: Vec<(u64, usize)> = (0..10u64).map(|i| (i, (i as usize * 23 + 7) % 256)).collect();
    let mut rng = derive_stream(2, Purpose::Phy, 0, 0);
    let obs = synthesize_rb(&c, &cb, &active, &mut rng).unwrap();
    let res = somp_recover(&obs.y, &cb, 31, DEFAULT_STOP_FACTOR, c.noise_var()).unwrap();
    assert!(res.residual_history.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    assert_eq!(res.residual_history.len(), res.iterations + 1);
    assert!(res.support.len() < 31, "stop rule should fire before the cap");
    assert!(res.residual_energy <= DEFAULT_STOP_FACTOR * (32 * 640) as f64 * c.noise_var());
    assert_eq!(evaluate_recovery(&obs, &res).unsuccessful, 0);
}

#[test]
fn collided_codes_fail_even_when_detected() {
    let c = rb_cfg(32, 256, 200, 30.0);
    let cb = generate_codebook(32, 256, 4).unwrap();
    let active = vec![(10u64, 5usize), (11, 5), (12, 77)];
    let mut rng = derive_stream(4, Purpose::Phy, 0, 0);
    let obs = synthesize_rb(&c, &cb, &active, &mut rng).unwrap();
    let res = somp_recover(&obs.y, &cb, 31, DEFAULT_STOP_FACTOR, c.noise_var()).unwrap();
    assert!(res.support_set().contains(&5));
    let out = evaluate_recovery(&obs, &res);
    assert_eq!(out.unsuccessful, 2);
    assert_eq!(out.successful_device_ids.into_iter().collect::<Vec<_>>(), vec![12]);
}

#[test]
fn invalid_requests_are_rejected() {
    let cb = generate_codebook(8, 16, 1).unwrap();
    let y = mrbcra::csmud::CMatrix::zeros(8, 4);
    assert!(somp_recover(&y, &cb, 8, 1.2, 0.01).is_err());
    assert!(somp_recover(&y, &cb, 0, 1.2, 0.01).is_err());
    assert!(somp_recover(&mrbcra::csmud::CMatrix::zeros(7, 4), &cb, 3, 1.2, 0.01).is_err());
    assert!(generate_codebook(0, 16, 1).is_err());
    let zero = somp_recover(&y, &cb, 3, 1.2, 0.0).unwrap();
    assert!(zero.support.is_empty());
}

#[test]
fn codebook_columns_have_unit_energy_on_average() {
    let cb = generate_codebook(64, 640, 7).unwrap();
    let mean: f64 = cb.entries.iter().map(|v| v.norm_sqr()).sum::<f64>() / 640.0;
    assert!((mean - 1.0).abs() < 0.02, "{mean}");
}

#[test]
fn curve_follows_collisions_at_light_load_and_breaks_down_later() {
    let p = CurveParams {
        l: 16,
        n: 128,
        t: 160,
        snr_db: 20.0,
        k_values: vec![2, 4, 6, 12, 15],
        trials: 60,
        seed: 3,
        stop_factor: DEFAULT_STOP_FACTOR,
    };
    let curve = empirical_unsuccessful_curve(&p).unwrap();
    for pt in &curve[..3] {
        assert!((pt.mean_unsuccessful - collision_only(pt.k, 128)).abs() < 0.3, "{pt:?}");
    }
    assert!(curve[4].mean_unsuccessful > collision_only(15, 128) + 1.0);
    let d = estimate_d(&curve, 128, 0.1).unwrap();
    assert!((6..15).contains(&d), "{d}");
    assert_eq!(curve, empirical_unsuccessful_curve(&p).unwrap());
}

#[test]
fn estimate_d_needs_three_points() {
    let pts = vec![CurvePoint { k: 1, mean_unsuccessful: 0.0, stderr: 0.0, trials: 1 }];
    assert!(matches!(estimate_d(&pts, 10, 0.1), Err(mrbcra::Error::InsufficientData(_))));
}

#[test]
fn curve_csv_layout() {
    let pts = vec![CurvePoint { k: 3, mean_unsuccessful: 0.5, stderr: 0.1, trials: 10 }];
    let mut buf = Vec::new();
    write_curve_csv(&pts, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "K,mean_unsuccessful,stderr,trials\n3,0.5,0.1,10\n");
}

#[test]
fn eight_distinct_codes_decode_reliably() {
    let c = rb_cfg(32, 320, 640, 20.0);
    let cb = generate_codebook(32, 320, 8).unwrap();
    let mut all_ok = 0;
    for trial in 0..200u64 {
        let active: Vec<(u64, usize)> = (0..8u64).map(|i| (i, ((i * 37 + trial * 11) % 320) as usize)).collect();
        let mut rng = derive_stream(8, Purpose::Phy, 0, trial);
        let obs = synthesize_rb(&c, &cb, &active, &mut rng).unwrap();
        let res = somp_recover(&obs.y, &cb, 31, DEFAULT_STOP_FACTOR, c.noise_var()).unwrap();
        if evaluate_recovery(&obs, &res).unsuccessful == 0 {
            all_ok += 1;
        }
    }
    assert!(all_ok >= 198, "{all_ok}/200");
}

#[test]
fn single_noiseless_device_is_found() {
    let c = rb_cfg(16, 64, 10, 20.0);
    let cb = generate_codebook(16, 64, 2).unwrap();
    let mut rng = derive_stream(1, Purpose::Phy, 0, 0);
    let obs = mrbcra::csmud::synthesize_rb(&SystemConfig { snr_db: 400.0, ..c }, &cb, &[(0, 9)], &mut rng).unwrap();
    let res = somp_recover(&obs.y, &cb, 15, DEFAULT_STOP_FACTOR, 0.0).unwrap();
    assert_eq!(res.support, vec![9]);
}
