//! Receiver cost of M parallel detectors at a fixed number of subcarriers.

use mrbcra::sim::complexity_model;

fn main() {
    let (j, eta, c) = (512, 10.0, 2.0);
    for l in [16, 32, 64, 128, 256] {
        let m = j / l;
        println!("L = {l:>3}, M = {m:>2}: cost {:>10.0}", complexity_model(l, m, eta, c));
    }
}
