//! Risk ratio E[L(ĵ)] / E[L(j*)] of each criterion, where L is the squared
//! error of the fitted mean.
//!
//!     cargo run --release --example efficiency

use mpicsel::simulation::{run_efficiency, SimConfig};

fn main() -> mpicsel::Result<()> {
    for (n, p) in [(50, 10), (100, 10), (300, 90)] {
        let res = run_efficiency(&SimConfig::nested(n, p, 100, 5))?;
        println!("n={n} p={p}");
        for o in &res.outcomes {
            println!(
                "  {:<12} eff {:>10.4}  P(select j*) {:.2}",
                o.label,
                o.efficiency.unwrap_or(f64::NAN),
                o.probability
            );
        }
    }
    Ok(())
}
