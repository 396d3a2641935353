//! Exhaustive selection over nested and all-subsets families on one draw
//! from the simulation design, printing the top of each ranking.
//!
//!     cargo run --example select_nested

use mpicsel::simulation::{default_true_model, gen_design, gen_response, replication_rng, ErrorDist};
use mpicsel::{select, CandidateFamily, CriterionSpec, Dataset};

fn main() -> mpicsel::Result<()> {
    let (n, p) = (200, 40);
    let tm = default_true_model(p)?;
    let mut rng = replication_rng(7, 0);
    let x = gen_design(n, 10, &mut rng);
    let y = gen_response(&x, &tm, &ErrorDist::Gaussian, &mut rng)?;
    let data = Dataset::new(y, x)?;
    println!("true model {}, n={n}, p={p}", tm.j_star);

    let families = [
        ("nested", CandidateFamily::Nested { k_max: 10 }),
        ("all subsets with intercept", CandidateFamily::with_intercept(8)),
    ];
    for (name, family) in &families {
        println!("\n{name}");
        for spec in CriterionSpec::standard_set() {
            let report = select(&data, family, &spec)?;
            let top: Vec<String> = report.ranked().iter().take(3).map(|(m, s)| format!("{m} {:.1}", s.value)).collect();
            println!(
                "  {:<12} best {:<22} skipped {:>3}  top: {}",
                report.criterion,
                report.best.to_string(),
                report.skipped().count(),
                top.join(", ")
            );
        }
    }
    Ok(())
}
