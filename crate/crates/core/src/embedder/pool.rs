use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::archive::{Tensor, WeightArchive};
use crate::error::{Error, Result};
use crate::grid::PatchId;

#[derive(Debug, Clone, PartialEq)]
pub struct PatchToken {
    pub patch: PatchId,
    pub values: Vec<f32>,
}

/// Elementwise `acc = max(acc, feature)`; ties keep the newer value.
#[inline]
pub fn max_into(acc: &mut [f32], feature: &[f32]) {
    for (a, &f) in acc.iter_mut().zip(feature) {
        if f >= *a {
            *a = f;
        }
    }
}

/// Channel-wise maximum over the features of one patch.
pub fn pool_patch(patch: PatchId, features: &[Vec<f32>]) -> Result<PatchToken> {
    let (first, rest) = features
        .split_first()
        .ok_or_else(|| Error::Precondition(format!("pooling patch {patch} with no events")))?;
    let mut values = first.clone();
    for f in rest {
        if f.len() != values.len() {
            return Err(Error::Precondition("feature widths differ within a patch".into()));
        }
        max_into(&mut values, f);
    }
    Ok(PatchToken { patch, values })
}

/// One learnt row per grid cell, indexed by flat patch index.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionalTable {
    rows: usize,
    width: usize,
    data: Vec<f32>,
}

impl PositionalTable {
    pub fn zeros(rows: usize, width: usize) -> Self {
        PositionalTable {
            rows,
            width,
            data: vec![0.0; rows * width],
        }
    }

    pub fn from_data(rows: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * width {
            return Err(Error::Config(format!(
                "positional table needs {rows}x{width} values, got {}",
                data.len()
            )));
        }
        Ok(PositionalTable { rows, width, data })
    }

    pub fn random(rows: usize, width: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * width).map(|_| rng.random_range(-0.1f32..0.1)).collect();
        PositionalTable { rows, width, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, flat: usize) -> Option<&[f32]> {
        (flat < self.rows).then(|| &self.data[flat * self.width..(flat + 1) * self.width])
    }

    pub fn write_to(&self, archive: &mut WeightArchive) -> Result<()> {
        archive.insert("pos.table", Tensor::matrix(self.rows, self.width, self.data.clone())?);
        Ok(())
    }

    pub fn read_from(archive: &WeightArchive, rows: usize, width: usize) -> Result<Self> {
        let t = archive.expect("pos.table", &[rows, width])?;
        Self::from_data(rows, width, t.data.clone())
    }
}

pub fn add_positional(mut token: PatchToken, flat: usize, table: &PositionalTable) -> Result<PatchToken> {
    let row = table
        .row(flat)
        .ok_or_else(|| Error::Config(format!("no positional row for patch {} (flat {flat})", token.patch)))?;
    if row.len() != token.values.len() {
        return Err(Error::Config(format!(
            "positional width {} does not match token width {}",
            row.len(),
            token.values.len()
        )));
    }
    for (v, r) in token.values.iter_mut().zip(row) {
        *v += r;
    }
    Ok(token)
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: PatchId = PatchId::new(0, 0);

    #[test]
    fn singleton_and_hand_max() {
        let t = pool_patch(P, &[vec![1.0, 5.0]]).unwrap();
        assert_eq!(t.values, vec![1.0, 5.0]);
        let t = pool_patch(P, &[vec![1.0, 5.0], vec![3.0, 2.0]]).unwrap();
        assert_eq!(t.values, vec![3.0, 5.0]);
    }

    #[test]
    fn empty_patch_is_precondition_violation() {
        assert!(matches!(pool_patch(P, &[]), Err(Error::Precondition(_))));
    }

    #[test]
    fn positional_identities() {
        let tok = PatchToken {
            patch: P,
            values: vec![1.0, 2.0],
        };
        let zero = PositionalTable::zeros(4, 2);
        assert_eq!(add_positional(tok.clone(), 3, &zero).unwrap(), tok);

        let table = PositionalTable::from_data(2, 2, vec![0.0, 0.0, 7.0, -1.0]).unwrap();
        let z = PatchToken {
            patch: P,
            values: vec![0.0, 0.0],
        };
        assert_eq!(add_positional(z.clone(), 1, &table).unwrap().values, vec![7.0, -1.0]);
        assert!(matches!(add_positional(z, 2, &table), Err(Error::Config(_))));
    }

    #[test]
    fn random_rows_are_unique() {
        let table = PositionalTable::random(256, 16, 3);
        let z = vec![0.25f32; 16];
        let mut outs: Vec<Vec<u32>> = (0..256)
            .map(|i| {
                let t = PatchToken {
                    patch: P,
                    values: z.clone(),
                };
                add_positional(t, i, &table).unwrap().values.iter().map(|v| v.to_bits()).collect()
            })
            .collect();
        outs.sort();
        outs.dedup();
        assert_eq!(outs.len(), 256);
    }
}
