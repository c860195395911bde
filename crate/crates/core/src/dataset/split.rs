use std::collections::BTreeSet;
use std::fmt::{self, Display, Write as _};

use crate::error::{Error, Result};

/// One walk-forward fold. Group lists are ascending and pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSpec<G> {
    /// 1-based.
    pub fold_index: usize,
    pub train_groups: Vec<G>,
    pub purged_groups: Vec<G>,
    pub validation_groups: Vec<G>,
}

/// Splits the distinct groups into `n_folds + 1` contiguous blocks (the first
/// `G mod (n_folds + 1)` blocks one larger). Fold i trains on blocks 1..=i,
/// purges their last `gap` groups, and validates on block i + 1.
pub fn purged_group_split<G: Ord + Clone>(groups: &[G], n_folds: usize, gap: usize) -> Result<Vec<FoldSpec<G>>> {
    if n_folds == 0 {
        return Err(Error::Config("n_folds must be positive".into()));
    }
    let distinct: Vec<G> = groups.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let g = distinct.len();
    let need = (n_folds + 1) + n_folds * gap;
    let blocks = n_folds + 1;
    let base = g / blocks;
    let extra = g % blocks;
    let first = base + usize::from(extra > 0);
    if g < need || first <= gap {
        return Err(Error::TooFewGroups {
            need: need.max(blocks * (gap + 1)),
            have: g,
        });
    }
    let mut bounds = Vec::with_capacity(blocks + 1);
    bounds.push(0);
    for b in 0..blocks {
        bounds.push(bounds[b] + base + usize::from(b < extra));
    }
    Ok((1..=n_folds)
        .map(|i| {
            let train_end = bounds[i];
            FoldSpec {
                fold_index: i,
                train_groups: distinct[..train_end - gap].to_vec(),
                purged_groups: distinct[train_end - gap..train_end].to_vec(),
                validation_groups: distinct[train_end..bounds[i + 1]].to_vec(),
            }
        })
        .collect())
}

/// Trailing holdout with a purge between it and the cross-validation range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoldoutSplit<G> {
    pub cv_groups: Vec<G>,
    pub purged_groups: Vec<G>,
    pub holdout_groups: Vec<G>,
}

/// Holds out the last `ceil(fraction · G)` groups, at least one.
pub fn holdout_split<G: Ord + Clone>(groups: &[G], fraction: f64, gap: usize) -> Result<HoldoutSplit<G>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("holdout fraction {fraction} must lie in (0, 1)")));
    }
    let distinct: Vec<G> = groups.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let g = distinct.len();
    let hold = ((fraction * g as f64).ceil() as usize).max(1);
    if g < hold + gap + 1 {
        return Err(Error::TooFewGroups {
            need: hold + gap + 1,
            have: g,
        });
    }
    let cut = g - hold;
    Ok(HoldoutSplit {
        cv_groups: distinct[..cut - gap].to_vec(),
        purged_groups: distinct[cut - gap..cut].to_vec(),
        holdout_groups: distinct[cut..].to_vec(),
    })
}

struct Joined<'a, G>(&'a [G]);

impl<G: Display> Display for Joined<'_, G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

/// One line per fold: `fold=<i> train=<ids> purged=<ids> validation=<ids>`.
pub fn fold_manifest<G: Display>(folds: &[FoldSpec<G>]) -> String {
    let mut out = String::new();
    for f in folds {
        let _ = writeln!(
            out,
            "fold={} train={} purged={} validation={}",
            f.fold_index,
            Joined(&f.train_groups),
            Joined(&f.purged_groups),
            Joined(&f.validation_groups)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_days_three_folds() {
        let days: Vec<u32> = (0..12).collect();
        let folds = purged_group_split(&days, 3, 1).unwrap();
        assert_eq!(folds[0].train_groups, vec![0, 1]);
        assert_eq!(folds[0].purged_groups, vec![2]);
        assert_eq!(folds[0].validation_groups, vec![3, 4, 5]);
        assert_eq!(folds[1].train_groups, (0..5).collect::<Vec<_>>());
        assert_eq!(folds[1].purged_groups, vec![5]);
        assert_eq!(folds[1].validation_groups, vec![6, 7, 8]);
        assert_eq!(folds[2].train_groups, (0..8).collect::<Vec<_>>());
        assert_eq!(folds[2].purged_groups, vec![8]);
        assert_eq!(folds[2].validation_groups, vec![9, 10, 11]);
    }

    #[test]
    fn gap_zero_adjacent() {
        let days: Vec<u32> = (0..6).collect();
        let folds = purged_group_split(&days, 2, 0).unwrap();
        assert_eq!(folds[0].train_groups, vec![0, 1]);
        assert!(folds[0].purged_groups.is_empty());
        assert_eq!(folds[0].validation_groups, vec![2, 3]);
    }

    #[test]
    fn too_few_groups() {
        let days: Vec<u32> = (0..10).collect();
        assert!(matches!(purged_group_split(&days, 5, 1), Err(Error::TooFewGroups { have: 10, .. })));
        assert!(purged_group_split(&(0..11).collect::<Vec<u32>>(), 5, 1).is_ok());
    }

    #[test]
    fn manifest_text() {
        let folds = purged_group_split(&[1, 2, 3, 4], 1, 1).unwrap();
        assert_eq!(fold_manifest(&folds), "fold=1 train=1 purged=2 validation=3,4\n");
    }

    #[test]
    fn holdout() {
        let h = holdout_split(&(0..10).collect::<Vec<u32>>(), 0.2, 1).unwrap();
        assert_eq!(h.cv_groups, (0..7).collect::<Vec<_>>());
        assert_eq!(h.purged_groups, vec![7]);
        assert_eq!(h.holdout_groups, vec![8, 9]);
    }
}
