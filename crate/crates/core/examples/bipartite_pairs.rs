//! Classic optimal pair matching: three treated units, five controls.

use repmatch::pairmatch::{match_optimal_pairs, BipartiteSpec};
use repmatch::statdist::CostMatrix;

fn main() -> repmatch::Result<()> {
    let distance = [
        [4.0, 6.0, 1.0, 5.0, 7.0],
        [2.0, 3.0, 2.5, 6.0, 8.0],
        [9.0, 7.0, 3.0, 1.5, 4.0],
    ];
    let spec = BipartiteSpec::full(CostMatrix::dense(3, 5, |i, j| distance[i][j])?)?;
    let sample = match_optimal_pairs(&spec)?;
    for p in &sample.pairs {
        println!("T{} - C{}  ({})", p.treated + 1, p.control + 1, distance[p.treated][p.control]);
    }
    println!("total distance {}", sample.objective);

    // Forbid T1-C3 and the other pairs rearrange.
    let spec = BipartiteSpec::full(CostMatrix::from_rows(
        5,
        (0..3)
            .map(|i| {
                (0..5)
                    .filter(|&j| (i, j) != (0, 2))
                    .map(|j| (j, distance[i][j]))
                    .collect()
            })
            .collect(),
    )?)?;
    let sample = match_optimal_pairs(&spec)?;
    let pairs: Vec<String> = sample
        .pairs
        .iter()
        .map(|p| format!("T{}-C{}", p.treated + 1, p.control + 1))
        .collect();
    println!("without T1-C3: {} (total {})", pairs.join(", "), sample.objective);
    Ok(())
}
