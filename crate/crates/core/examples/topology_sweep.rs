//! Runs a small generative sweep around one synthetic reference wheel and prints
//! each result as ASCII art.
//!
//! cargo run --example topology_sweep -- [grid] [max_iter]

use std::time::Instant;

use wheelforge::designspace::{l1_distance, synth_reference, DesignImage, ReferenceParams};
use wheelforge::topopt::{sweep, DomainSpec, SweepLevels, TopOptSettings};

fn ascii(img: &DesignImage) -> String {
    let n = img.size();
    let step = (n / 32).max(1);
    let mut s = String::new();
    for y in (0..n).step_by(step) {
        for x in (0..n).step_by(step) {
            s.push(if img.get(x, y) >= 0.5 { '#' } else { '.' });
        }
        s.push('\n');
    }
    s
}

fn main() -> wheelforge::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let grid = args.first().copied().unwrap_or(64);
    let max_iter = args.get(1).copied().unwrap_or(100);

    let reference = synth_reference(&ReferenceParams::default(), grid, "ref")?;
    println!("reference:\n{}", ascii(&reference));
    let levels = SweepLevels {
        lambda: vec![0.0005, 0.05, 5.0],
        shear_ratio: vec![0.2],
        vol_frac: vec![1.0],
    };
    let spec = DomainSpec { grid, ..DomainSpec::default() };
    let settings = TopOptSettings { max_iter, ..TopOptSettings::default() };
    let start = Instant::now();
    let out = sweep(&reference, &levels, &spec, &settings)?;
    for (row, img) in out.rows.iter().zip(out.set.items()) {
        println!(
            "{} lambda={} compliance={:.4e} iters={} converged={} l1={} ({:.2}s)",
            row.id,
            row.lambda,
            row.compliance.unwrap_or(f64::NAN),
            row.iterations,
            row.converged,
            l1_distance(img, &reference)?,
            row.seconds
        );
        println!("{}", ascii(img));
    }
    println!("total {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
