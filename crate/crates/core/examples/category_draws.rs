//! Random subsets stratified by category: every draw keeps at least one
//! control from each group, with per-group dimensions from a largest
//! remainder split of k.
//!
//! ```text
//! cargo run --release --example category_draws
//! ```

use rslp::rng::{purpose, stream};
use rslp::subspace::{allocate_category_dims, draw_by_category, draw_uniform, CategoryLayout};

fn main() -> rslp::Result<()> {
    let labels: Vec<&str> = ["output"; 12]
        .into_iter()
        .chain(["labor"; 25])
        .chain(["prices"; 3])
        .chain(["money"; 10])
        .collect();
    let layout = CategoryLayout::from_labels(&labels, 8)?;
    println!("sizes 12/25/3/10 with k = 8 -> dims {:?}", allocate_category_dims(&[12, 25, 3, 10], 8)?);

    let mut rng = stream(1, &[purpose::DRAWS]);
    let mut empty_prices_uniform = 0;
    for i in 0..1000 {
        let strat = draw_by_category(&layout, &mut rng)?;
        let unif = draw_uniform(labels.len(), 8, &mut rng)?;
        if i < 3 {
            let named: Vec<&str> = strat.indices.iter().map(|&j| labels[j]).collect();
            println!("draw {i}: {:?}", named);
        }
        if !unif.indices.iter().any(|&j| labels[j] == "prices") {
            empty_prices_uniform += 1;
        }
    }
    println!("uniform draws without a price series: {empty_prices_uniform} of 1000 (stratified: 0)");
    Ok(())
}
