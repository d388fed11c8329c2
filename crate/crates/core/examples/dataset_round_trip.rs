//! Datasets can be cached as CSV and read back bit for bit.

use robust_sysid::prelude::*;
use robust_sysid::sim::{read_dataset_from, write_dataset_to};

pub fn main() {
    let sys = LtiSystem::new(Mat::from_rows(&[[0.3, -0.7], [0.6, 0.2]]).unwrap()).unwrap();
    let clean = collect(&sys, &NoiseSpec::spike(0.3, 2.0).unwrap(), 4, 50, 8);
    let spec = CorruptionSpec::new(0.1, CorruptionStrategy::SignFlipScale { gamma: 4.0 }).unwrap();
    let data = corrupt(&clean, &spec, &mut SeededRng::new(8)).unwrap();

    let mut buf = Vec::new();
    write_dataset_to(&data, &mut buf).unwrap();
    let back = read_dataset_from(buf.as_slice()).unwrap();
    let text = String::from_utf8(buf).unwrap();
    println!("{} bytes, {} lines; header: {}", text.len(), text.lines().count(), text.lines().next().unwrap());
    println!("corrupted trajectories: {:?}", back.corrupted_indices());
    assert_eq!(back, data);
}
