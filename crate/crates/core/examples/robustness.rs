//! Selection probability under non-normal errors.

use mpicsel::simulation::{run_selection_probability, ErrorDist, SimConfig};

fn main() -> mpicsel::Result<()> {
    let (n, p) = (300, 60);
    for dist in std::iter::once(ErrorDist::Gaussian).chain(ErrorDist::robustness_set()) {
        let res = run_selection_probability(&SimConfig::nested(n, p, 40, 9).with_error(dist))?;
        let cells: Vec<String> = res.outcomes.iter().map(|o| format!("{} {:.2}", o.label, o.probability)).collect();
        println!("{:<20} {}", dist.name(), cells.join("  "));
    }
    Ok(())
}
