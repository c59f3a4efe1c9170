//! Time reconstruction at a few frame sizes and thread counts.

use aspi::bench::{bench_reconstruction, BenchConfig};

fn main() -> aspi::Result<()> {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    for size in [128, 256, 512] {
        for threads in if cores > 1 { vec![1, cores] } else { vec![1] } {
            let report = bench_reconstruction(&BenchConfig {
                width: size,
                height: size,
                num_shifts: 30,
                sections: 20,
                threads,
            })?;
            println!("{}", report.summary());
        }
    }
    Ok(())
}
