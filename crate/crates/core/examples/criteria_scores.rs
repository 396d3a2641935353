//! Scores one simulated dataset under every criterion and shows how the
//! criterion value splits into fit and penalty.
//!
//!     cargo run --example criteria_scores

use mpicsel::criteria::{log_marginal_ratio, AlphaSpec};
use mpicsel::simulation::{default_true_model, gen_design, gen_response, replication_rng, ErrorDist};
use mpicsel::{fit, score, CriterionSpec, Dataset, GicBeta, ModelIndex, PriorKind, WeightScheme};

fn main() -> mpicsel::Result<()> {
    let (n, p) = (120, 6);
    let tm = default_true_model(p)?;
    let mut rng = replication_rng(2024, 0);
    let x = gen_design(n, 10, &mut rng);
    let y = gen_response(&x, &tm, &ErrorDist::Gaussian, &mut rng)?;
    let data = Dataset::new(y, x)?;

    let criteria = [
        CriterionSpec::Aic,
        CriterionSpec::Aicc,
        CriterionSpec::Bic,
        CriterionSpec::Gic { beta: GicBeta::Auto },
        CriterionSpec::Gic { beta: GicBeta::Fixed(1.0) },
        CriterionSpec::mpic_default(),
        CriterionSpec::Mpic { prior: PriorKind::Normal, weight: WeightScheme::default() },
        CriterionSpec::Mpic { prior: PriorKind::Uniform, weight: WeightScheme::InversePower { epsilon: 0.5 } },
        CriterionSpec::Mpic {
            prior: PriorKind::Normal,
            weight: WeightScheme::BetaPosterior {
                alpha: AlphaSpec::Constant(1.0),
                beta_epsilon: 0.499,
                prior: PriorKind::Normal,
            },
        },
    ];

    for k_j in [4, 5, 6] {
        let model = ModelIndex::prefix(k_j)?;
        println!("model {model}");
        for c in &criteria {
            let s = score(&data, &model, c)?;
            print!("  {:<40} value {:>12.4}  -2loglik {:>12.4}  penalty {:>10.4}", c.label(), s.value, s.neg2loglik, s.penalty);
            if let Some(w) = s.w_used {
                print!("  w {w:.3e}");
            }
            println!();
        }
        let f = fit(&data, &model)?;
        for prior in [PriorKind::Normal, PriorKind::Uniform] {
            if let Some(a) = log_marginal_ratio(prior, &data, &f)? {
                println!("  log marginal ratio ({}) = {a:.4}", prior.name());
            }
        }
    }
    Ok(())
}
