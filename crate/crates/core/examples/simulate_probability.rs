//! Selection probability of each criterion as n grows with p/n fixed.
//!
//!     cargo run --release --example simulate_probability [reps]

use mpicsel::simulation::{run_selection_probability, SimConfig};

fn main() -> mpicsel::Result<()> {
    let reps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    for ratio in [0.02, 0.3] {
        println!("p/n = {ratio}");
        for n in [50, 100, 200, 400] {
            let p = ((n as f64 * ratio).ceil() as usize).max(1);
            let res = run_selection_probability(&SimConfig::nested(n, p, reps, 11))?;
            let cells: Vec<String> = res.outcomes.iter().map(|o| format!("{} {:.2}", o.label, o.probability)).collect();
            println!("  n={n:<4} p={p:<4} {}", cells.join("  "));
        }
    }
    Ok(())
}
