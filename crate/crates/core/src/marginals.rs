//! Edge-marginal vectors under a Gibbs model at temperature `lambda`.

/// Per-edge inclusion probabilities aligned with the canonical edge order of
/// the [`EdgeSystem`](crate::geometry::EdgeSystem) they were computed from.
#[derive(Debug, Clone)]
pub struct MarginalVector {
    values: Vec<f64>,
    lambda: f64,
}

impl MarginalVector {
    pub fn new(values: Vec<f64>, lambda: f64) -> Self {
        MarginalVector { values, lambda }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}
