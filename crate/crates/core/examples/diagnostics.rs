//! Noncentrality of underspecified models, the design-determinant check, and
//! the weight conditions on a grid.

use mpicsel::diagnostics::{check_design_assumption, check_weight_conditions, noncentrality, Condition};
use mpicsel::simulation::{default_true_model, gen_design, gen_response, replication_rng, ErrorDist};
use mpicsel::{CandidateFamily, Dataset, ModelIndex, WeightScheme};

fn main() -> mpicsel::Result<()> {
    let (n, p) = (200, 8);
    let tm = default_true_model(p)?;
    let mut rng = replication_rng(1, 0);
    let x = gen_design(n, 10, &mut rng);

    println!("noncentrality");
    for k_j in 1..=7 {
        let d = noncentrality(&x, &tm, &ModelIndex::prefix(k_j)?)?;
        println!("  k_j={k_j}  gamma={}  lambda={:.4e}  lambda/(np)={:.4}", d.gamma_j, d.lambda_j, d.scaled);
    }

    let y = gen_response(&x, &tm, &ErrorDist::Gaussian, &mut rng)?;
    let data = Dataset::new(y, x)?;
    let design = check_design_assumption(&data, &CandidateFamily::Nested { k_max: 10 })?;
    println!("\ndesign: lambda_min(X'X/n) = {:.4}, flagged models: {}", design.lambda_min, design.flagged().count());

    let grid: Vec<(usize, usize)> = [100, 200, 400, 800, 1600].iter().map(|&n| (n, n / 10)).collect();
    for scheme in [WeightScheme::default(), WeightScheme::InversePower { epsilon: 0.5 }] {
        println!("\n{scheme}");
        for (k_j, gamma) in [(4, 1), (6, 0)] {
            let rep = check_weight_conditions(&scheme, &grid, 5, k_j, gamma)?;
            for c in Condition::ALL.into_iter().filter(|c| c.applies_to(5, k_j, gamma)) {
                println!("  k_j={k_j} {:<6} {}", c.name(), rep.verdict(c).name());
            }
        }
    }
    Ok(())
}
