//! Block matrices whose blocks are [`LinOp`]s on a shared grid.
//!
//! Absent blocks are structural zeros: products that only ever meet absent
//! blocks stay absent, so identities such as `Q^2 = 0` hold exactly rather
//! than to rounding.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::linop::LinOp;

#[derive(Clone, Debug)]
pub struct BlockOp {
    m: usize,
    grid: Grid1D,
    blocks: Vec<Option<LinOp>>,
}

impl BlockOp {
    pub fn zeros(m: usize, grid: Grid1D) -> Self {
        Self {
            m,
            grid,
            blocks: vec![None; m * m],
        }
    }

    /// Sets block `(i, j)` (zero-based).
    pub fn with(mut self, i: usize, j: usize, op: LinOp) -> Result<Self> {
        self.set(i, j, op)?;
        Ok(self)
    }

    pub fn set(&mut self, i: usize, j: usize, op: LinOp) -> Result<()> {
        if *op.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        self.blocks[i * self.m + j] = Some(op);
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&LinOp> {
        self.blocks[i * self.m + j].as_ref()
    }

    fn compatible(&self, other: &BlockOp) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.m != other.m {
            return Err(Error::Validation(format!(
                "block sizes differ: {} vs {}",
                self.m, other.m
            )));
        }
        Ok(())
    }

    pub fn mul(&self, other: &BlockOp) -> Result<BlockOp> {
        self.compatible(other)?;
        let mut out = BlockOp::zeros(self.m, self.grid);
        for i in 0..self.m {
            for j in 0..self.m {
                let mut acc: Option<LinOp> = None;
                for k in 0..self.m {
                    if let (Some(a), Some(b)) = (self.get(i, k), other.get(k, j)) {
                        let p = a.matmul(b)?;
                        acc = Some(match acc {
                            None => p,
                            Some(s) => s.add(&p)?,
                        });
                    }
                }
                out.blocks[i * self.m + j] = acc;
            }
        }
        Ok(out)
    }

    fn combine(&self, other: &BlockOp, sign: f64) -> Result<BlockOp> {
        self.compatible(other)?;
        let mut out = BlockOp::zeros(self.m, self.grid);
        for (idx, slot) in out.blocks.iter_mut().enumerate() {
            *slot = match (&self.blocks[idx], &other.blocks[idx]) {
                (None, None) => None,
                (Some(a), None) => Some(a.clone()),
                (None, Some(b)) => Some(b.scale(sign)),
                (Some(a), Some(b)) if sign > 0.0 => Some(a.add(b)?),
                (Some(a), Some(b)) => Some(a.sub(b)?),
            };
        }
        Ok(out)
    }

    pub fn add(&self, other: &BlockOp) -> Result<BlockOp> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &BlockOp) -> Result<BlockOp> {
        self.combine(other, -1.0)
    }

    pub fn adjoint(&self) -> BlockOp {
        let mut out = BlockOp::zeros(self.m, self.grid);
        for i in 0..self.m {
            for j in 0..self.m {
                out.blocks[j * self.m + i] = self.get(i, j).map(LinOp::adjoint);
            }
        }
        out
    }

    /// True when no block is present.
    pub fn is_structurally_zero(&self) -> bool {
        self.blocks.iter().all(Option::is_none)
    }

    /// True when every off-diagonal block is absent.
    pub fn is_structurally_block_diagonal(&self) -> bool {
        (0..self.m).all(|i| (0..self.m).all(|j| i == j || self.get(i, j).is_none()))
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .map(LinOp::max_abs)
            .fold(0.0, f64::max)
    }

    /// Blockwise max-abs difference, absent blocks read as zero.
    pub fn max_abs_diff(&self, other: &BlockOp) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    /// Leading `k x k` sub-block.
    pub fn leading(&self, k: usize) -> BlockOp {
        let mut out = BlockOp::zeros(k, self.grid);
        for i in 0..k {
            for j in 0..k {
                out.blocks[i * k + j] = self.get(i, j).cloned();
            }
        }
        out
    }

    /// Applies the operator to a block vector (one slot per block row).
    pub fn apply(&self, slots: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
        if slots.len() != self.m {
            return Err(Error::LengthMismatch {
                expected: self.m,
                got: slots.len(),
            });
        }
        let n = self.grid.n();
        let mut out = vec![vec![C64::new(0.0, 0.0); n]; self.m];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, slot) in slots.iter().enumerate() {
                if let Some(op) = self.get(i, j) {
                    for (o, v) in row.iter_mut().zip(op.apply(slot)?) {
                        *o += v;
                    }
                }
            }
        }
        Ok(out)
    }
}

pub fn commutator(a: &BlockOp, b: &BlockOp) -> Result<BlockOp> {
    a.mul(b)?.sub(&b.mul(a)?)
}

pub fn anticommutator(a: &BlockOp, b: &BlockOp) -> Result<BlockOp> {
    a.mul(b)?.add(&b.mul(a)?)
}
