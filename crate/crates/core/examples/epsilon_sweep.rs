//! Sensitivity of MPIC_Approx to the weight exponent.

use mpicsel::simulation::{epsilon_sweep_criteria, run_selection_probability, SimConfig};

fn main() -> mpicsel::Result<()> {
    let criteria = epsilon_sweep_criteria();
    for (n, p) in [(100, 2), (100, 30), (500, 2)] {
        let cfg = SimConfig::nested(n, p, 60, 3).with_criteria(criteria.clone());
        let res = run_selection_probability(&cfg)?;
        println!("n={n} p={p}");
        for o in &res.outcomes {
            println!("  {:<32} {:.3}", o.label, o.probability);
        }
    }
    Ok(())
}
