use std::collections::HashMap;

use crate::dataio::SampleId;
use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

use super::{entropy, l2_normalize};

/// L2-normalized feature store over the target samples, one row per id.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryBank<T> {
    rows: Vec<Vec<T>>,
    index: HashMap<SampleId, usize>,
    ids: Vec<SampleId>,
    temperature: T,
    dim: usize,
    writes: Vec<u64>,
}

impl<T: Scalar> MemoryBank<T> {
    /// Rows start empty; the bank is usable once every row has been written.
    pub fn new(ids: Vec<SampleId>, dim: usize, temperature: T) -> Result<Self> {
        if !(temperature > T::zero()) {
            return Err(Error::Bank(format!("temperature must be positive, got {temperature}")));
        }
        if dim == 0 {
            return Err(Error::Bank("feature dimension must be positive".into()));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Bank(format!("duplicate id {id}")));
            }
        }
        Ok(Self {
            rows: vec![vec![T::zero(); dim]; ids.len()],
            index,
            writes: vec![0; ids.len()],
            ids,
            temperature,
            dim,
        })
    }

    pub fn from_features(ids: Vec<SampleId>, features: &[Vec<T>], temperature: T) -> Result<Self> {
        let dim = features.first().map(Vec::len).unwrap_or(0);
        let mut bank = Self::new(ids.clone(), dim, temperature)?;
        update_bank(&mut bank, features, &ids)?;
        Ok(bank)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn temperature(&self) -> T {
        self.temperature
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.rows[i]
    }

    pub fn row_of(&self, id: &SampleId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn ids(&self) -> &[SampleId] {
        &self.ids
    }

    /// Number of writes each row has received.
    pub fn write_counts(&self) -> &[u64] {
        &self.writes
    }

    pub fn is_initialized(&self) -> bool {
        self.writes.iter().all(|&w| w > 0)
    }

    /// Direct row overwrite (already normalized); for tests and tooling.
    pub fn set_row_raw(&mut self, i: usize, v: Vec<T>) {
        assert_eq!(v.len(), self.dim);
        self.rows[i] = v;
    }

    fn require_row(&self, id: &SampleId) -> Result<usize> {
        self.row_of(id)
            .ok_or_else(|| Error::Bank(format!("id {id} is not registered in the memory bank")))
    }
}

/// Softmax over `F_j . f / T` for every row `j` except `self_id`'s.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborProbs<T> {
    pub rows: Vec<usize>,
    pub probs: Vec<T>,
}

impl<T: Scalar> NeighborProbs<T> {
    pub fn entropy(&self) -> T {
        entropy(&self.probs)
    }
}

pub fn neighbor_probs<T: Scalar>(bank: &MemoryBank<T>, feature: &[T], self_id: &SampleId) -> Result<NeighborProbs<T>> {
    let me = bank.require_row(self_id)?;
    if bank.len() < 2 {
        return Err(Error::Bank("memory bank has no rows besides the query".into()));
    }
    if feature.len() != bank.dim {
        return Err(Error::Shape(format!("feature of length {} vs bank dim {}", feature.len(), bank.dim)));
    }
    let mut rows = Vec::with_capacity(bank.len() - 1);
    let mut logits = Vec::with_capacity(bank.len() - 1);
    for (j, r) in bank.rows.iter().enumerate() {
        if j == me {
            continue;
        }
        rows.push(j);
        logits.push(dot(r, feature) / bank.temperature);
    }
    crate::scalar::softmax_in_place(&mut logits);
    Ok(NeighborProbs { rows, probs: logits })
}

/// Mean neighborhood entropy of the batch (features already normalized).
pub fn loss_self_training<T: Scalar>(bank: &MemoryBank<T>, features: &[Vec<T>], ids: &[SampleId]) -> Result<T> {
    Ok(self_training_grad(bank, features, ids)?.0)
}

/// Loss and gradient w.r.t. each (normalized) batch feature; the bank is a
/// constant. Gradients are divided by the batch size.
pub fn self_training_grad<T: Scalar>(
    bank: &MemoryBank<T>,
    features: &[Vec<T>],
    ids: &[SampleId],
) -> Result<(T, Vec<Vec<T>>)> {
    if features.len() != ids.len() || features.is_empty() {
        return Err(Error::Shape(format!("{} features vs {} ids", features.len(), ids.len())));
    }
    let n = T::c(features.len() as f64);
    let inv_t = T::one() / bank.temperature;
    let mut total = T::zero();
    let mut grads = Vec::with_capacity(features.len());
    for (f, id) in features.iter().zip(ids) {
        let np = neighbor_probs(bank, f, id)?;
        let h = np.entropy();
        total += h;
        // dH/ds_j = -p_j (ln p_j + H), with s_j = F_j . f / T.
        let mut g = vec![T::zero(); bank.dim];
        for (&j, &p) in np.rows.iter().zip(&np.probs) {
            if p <= T::zero() {
                continue;
            }
            let ds = -p * (p.ln() + h) * inv_t / n;
            for (gk, &fk) in g.iter_mut().zip(&bank.rows[j]) {
                *gk += ds * fk;
            }
        }
        grads.push(g);
    }
    Ok((total / n, grads))
}

/// Overwrites the named rows with the L2-normalized features.
pub fn update_bank<T: Scalar>(bank: &mut MemoryBank<T>, features: &[Vec<T>], ids: &[SampleId]) -> Result<()> {
    if features.len() != ids.len() {
        return Err(Error::Shape(format!("{} features vs {} ids", features.len(), ids.len())));
    }
    let rows = ids.iter().map(|id| bank.require_row(id)).collect::<Result<Vec<_>>>()?;
    for (f, r) in features.iter().zip(rows) {
        if f.len() != bank.dim {
            return Err(Error::Shape(format!("feature of length {} vs bank dim {}", f.len(), bank.dim)));
        }
        bank.rows[r] = l2_normalize(f).0;
        bank.writes[r] += 1;
    }
    Ok(())
}
