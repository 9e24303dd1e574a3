use crate::scalar::Real;

/// Components of a tensor at one point, contravariant indices first.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    contravariant: usize,
    covariant: usize,
    dim: usize,
    components: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(contravariant: usize, covariant: usize, dim: usize) -> Self {
        let n = dim.pow((contravariant + covariant) as u32);
        Self { contravariant, covariant, dim, components: vec![T::zero(); n] }
    }

    /// Panics if the component count is not `dim^(r+s)`.
    pub fn from_components(contravariant: usize, covariant: usize, dim: usize, components: Vec<T>) -> Self {
        assert_eq!(components.len(), dim.pow((contravariant + covariant) as u32), "component count");
        Self { contravariant, covariant, dim, components }
    }

    pub fn valence(&self) -> (usize, usize) {
        (self.contravariant, self.covariant)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[T] {
        &self.components
    }

    fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.contravariant + self.covariant);
        index.iter().fold(0, |acc, &i| {
            assert!(i < self.dim);
            acc * self.dim + i
        })
    }

    pub fn get(&self, index: &[usize]) -> T {
        self.components[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: T) {
        let o = self.offset(index);
        self.components[o] = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn component_count_and_indexing() {
        let mut t = Tensor::<f64>::zeros(1, 2, 3);
        assert_eq!(t.components().len(), 27);
        t.set(&[2, 0, 1], 5.0);
        assert_eq!(t.get(&[2, 0, 1]), 5.0);
        assert_eq!(t.components()[2 * 9 + 1], 5.0);
    }

    #[test]
    #[should_panic(expected = "component count")]
    fn wrong_count_panics() {
        let _ = Tensor::from_components(0, 2, 2, vec![0.0_f64; 3]);
    }
}
