use crate::error::{Error, Result};

/// A normalized distribution over token ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDist(Vec<f64>);

impl ProbDist {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDist("empty distribution".into()));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::InvalidDist(format!("entry {i} = {p} outside [0,1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidDist(format!("entries sum to {sum}")));
        }
        Ok(ProbDist(probs))
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "uniform distribution needs a nonempty support");
        ProbDist(vec![1.0 / len as f64; len])
    }

    /// Callers guarantee the invariants hold.
    pub(crate) fn from_normalized(probs: Vec<f64>) -> Self {
        debug_assert!(Self::new(probs.clone()).is_ok());
        ProbDist(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Index of the largest probability; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates() {
        assert!(ProbDist::new(vec![0.5, 0.5]).is_ok());
        assert!(ProbDist::new(vec![0.5, 0.4]).is_err());
        assert!(ProbDist::new(vec![1.5, -0.5]).is_err());
        assert!(ProbDist::new(vec![]).is_err());
        assert!(ProbDist::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        let d = ProbDist::new(vec![0.2, 0.4, 0.4]).unwrap();
        assert_eq!(d.argmax(), 1);
        assert_eq!(ProbDist::uniform(4).argmax(), 0);
    }
}
