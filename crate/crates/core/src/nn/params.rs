use serde::{Deserialize, Serialize};

use super::tensor::{Matrix, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Named parameter arrays plus the optimiser step counter.
///
/// Shapes are fixed once a parameter is added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStore<T> {
    names: Vec<String>,
    values: Vec<Matrix<T>>,
    pub steps: u64,
}

impl<T: Real> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            values: Vec::new(),
            steps: 0,
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix<T>) -> ParamId {
        let name = name.into();
        assert!(
            !self.names.contains(&name),
            "duplicate parameter name {name}"
        );
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Matrix<T> {
        &self.values[id.0]
    }

    /// Mutable access to the values; shapes must be preserved.
    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix<T> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix<T>)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn values(&self) -> &[Matrix<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Matrix<T>] {
        &mut self.values
    }

    pub fn n_scalars(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.names == other.names
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.shape() == b.shape())
    }

    /// Copies every value from `other`, which must share the layout.
    pub fn copy_from(&mut self, other: &Self) {
        assert!(self.same_layout(other), "parameter layouts differ");
        for (dst, src) in self.values.iter_mut().zip(&other.values) {
            dst.data.copy_from_slice(&src.data);
        }
    }

    pub fn zero_grads(&self) -> Gradients<T> {
        Gradients {
            slots: self
                .values
                .iter()
                .map(|v| Matrix::zeros(v.rows, v.cols))
                .collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            values: self.values.iter().map(Matrix::cast).collect(),
            steps: self.steps,
        }
    }
}

/// One gradient slot per parameter, same shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub slots: Vec<Matrix<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, id: ParamId) -> &Matrix<T> {
        &self.slots[id.0]
    }

    pub fn global_norm(&self) -> f64 {
        self.slots.iter().map(Matrix::sq_norm).sum::<f64>().sqrt()
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.slots.iter_mut().zip(&other.slots) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: T) {
        for g in &mut self.slots {
            g.scale_assign(s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slots.iter().all(|g| g.data.iter().all(|v| v.is_finite()))
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slots
            .iter()
            .flat_map(|g| g.data.iter().map(|v| v.as_f64()))
            .collect()
    }
}
