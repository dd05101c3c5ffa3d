//! Counter-based streams: the same (seed, purpose, rb, slot) always yields
//! the same numbers, regardless of draw order elsewhere.

use mrbcra::{derive_stream, Purpose};
use rand::Rng;

fn main() {
    for (rb, slot) in [(0, 0), (0, 1), (3, 0), (0, 0)] {
        let mut s = derive_stream(42, Purpose::Arrivals, rb, slot);
        let x: Vec<u32> = (0..4).map(|_| s.gen_range(0..100)).collect();
        println!("rb {rb} slot {slot}: {x:?}");
    }
}
