use crate::error::{Error, Result};
use crate::exec::derive_seed;
use crate::folds::SideBlocks;

use super::Generator;

/// Family-0 blocks cut out of one path.
pub fn original_blocks(series: &[f64], side: &SideBlocks) -> Result<Vec<Vec<f64>>> {
    let needed = 2 * side.a * side.mu();
    if series.len() < needed {
        return Err(Error::BadParams(format!(
            "path of length {} is shorter than the {needed} points the layout spans",
            series.len()
        )));
    }
    Ok(side.family0.iter().map(|r| series[r.clone()].to_vec()).collect())
}

/// Independent copies of the family-0 blocks: each block comes from its own
/// stationary path, so block marginals are kept and cross-block dependence
/// is removed.
pub fn independent_blocks_redraw(gen: &Generator, side: &SideBlocks, seed: u64) -> Result<Vec<Vec<f64>>> {
    if matches!(gen, Generator::LinearModel { .. }) {
        return Err(Error::BadParams(
            "independent blocks need a sequential generator".into(),
        ));
    }
    (0..side.mu())
        .map(|i| gen.series(side.a, derive_seed(seed, i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let side = SideBlocks::new(12, 2).unwrap();
        let g = Generator::ar1(0.5, 1.0);
        let path = g.series(12, 1).unwrap();
        let orig = original_blocks(&path, &side).unwrap();
        assert_eq!(orig, vec![path[0..3].to_vec(), path[6..9].to_vec()]);
        let redraw = independent_blocks_redraw(&g, &side, 2).unwrap();
        assert_eq!(redraw.len(), 2);
        assert!(redraw.iter().all(|b| b.len() == 3));
        assert!(original_blocks(&path[..10], &side).is_err());
    }
}
