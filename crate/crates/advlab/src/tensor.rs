//! Dense n-dimensional `f64` arrays.
//!
//! Images are stored row-major with axis order (height, width, channels),
//! so `get(&[y, x, z])` reads the z channel at pixel (x, y). Tensors are
//! immutable values after construction and every public operation keeps
//! them finite (no NaN/Inf).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensions of a tensor. Every dim is at least 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Shape> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(Error::arg("shape must have at least one dimension"));
        }
        if dims.contains(&0) {
            return Err(Error::arg(format!("zero-sized dimension in shape {dims:?}")));
        }
        Ok(Shape(dims))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    /// Total element count (product of dims).
    pub fn elem_count(&self) -> usize {
        self.0.iter().product()
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Dense row-major array of finite `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, rejecting length mismatches and non-finite values.
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Tensor> {
        if data.len() != shape.elem_count() {
            return Err(Error::arg(format!(
                "data length {} does not match shape {} ({} elements)",
                data.len(),
                shape,
                shape.elem_count()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("tensor construction"));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Tensor {
        let n = shape.elem_count();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }

    /// Rank-1 tensor from a vector.
    pub fn from_vec(data: Vec<f64>) -> Result<Tensor> {
        let shape = Shape::new(vec![data.len().max(1)])?;
        Tensor::new(shape, data)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Element at a multi-dimensional index. Panics on rank or bounds errors.
    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.flat_index(index)]
    }

    fn flat_index(&self, index: &[usize]) -> usize {
        let dims = self.shape.dims();
        assert_eq!(index.len(), dims.len(), "index rank mismatch");
        let mut flat = 0;
        for (i, (&ix, &d)) in index.iter().zip(dims).enumerate() {
            assert!(ix < d, "index {ix} out of bounds for dim {i} (size {d})");
            flat = flat * d + ix;
        }
        flat
    }

    /// Elementwise sign: -1 for negatives, +1 for positives, 0 for zero.
    pub fn sign(&self) -> Tensor {
        self.map(|v| {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
    }

    /// Applies `f` to every element. The result must stay finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        let data: Vec<f64> = self.data.iter().map(|&v| f(v)).collect();
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Tensor {
            shape: self.shape.clone(),
            data,
        }
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a + b, "add")
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a - b, "sub")
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        self.map(|v| v * factor)
    }

    fn zip_map(
        &self,
        other: &Tensor,
        f: impl Fn(f64, f64) -> f64,
        context: &'static str,
    ) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::shape(self.shape.dims(), other.shape.dims(), context));
        }
        let data: Vec<f64> = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    /// Largest absolute elementwise difference to `other`.
    pub fn linf_distance(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::shape(
                self.shape.dims(),
                other.shape.dims(),
                "linf_distance",
            ));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Elementwise clip of `t` into [lo, hi].
///
/// `lo` and `hi` must either match `t`'s shape or be single-element tensors
/// (broadcast as scalars), with lo <= hi wherever they apply.
pub fn box_clamp(t: &Tensor, lo: &Tensor, hi: &Tensor) -> Result<Tensor> {
    let lo_at = Bound::reader(t, lo, "box_clamp lower bound")?;
    let hi_at = Bound::reader(t, hi, "box_clamp upper bound")?;
    let mut data = Vec::with_capacity(t.len());
    for i in 0..t.len() {
        let (l, h) = (lo_at.at(i), hi_at.at(i));
        if l > h {
            return Err(Error::arg(format!(
                "box_clamp bounds inverted at element {i}: lo {l} > hi {h}"
            )));
        }
        data.push(t.data[i].max(l).min(h));
    }
    Ok(Tensor {
        shape: t.shape.clone(),
        data,
    })
}

enum Bound<'a> {
    Full(&'a [f64]),
    Scalar(f64),
}

impl<'a> Bound<'a> {
    fn reader(t: &Tensor, bound: &'a Tensor, context: &'static str) -> Result<Bound<'a>> {
        if bound.shape == t.shape {
            Ok(Bound::Full(&bound.data))
        } else if bound.len() == 1 {
            Ok(Bound::Scalar(bound.data[0]))
        } else {
            Err(Error::shape(t.shape.dims(), bound.shape.dims(), context))
        }
    }

    fn at(&self, i: usize) -> f64 {
        match self {
            Bound::Full(data) => data[i],
            Bound::Scalar(v) => *v,
        }
    }
}

/// Indices of the k largest scores, highest first; ties go to the lower index.
pub fn top_k(scores: &Tensor, k: usize) -> Result<Vec<usize>> {
    if scores.shape.rank() != 1 {
        return Err(Error::arg(format!(
            "top_k expects a rank-1 tensor, got shape {}",
            scores.shape
        )));
    }
    if k == 0 || k > scores.len() {
        return Err(Error::arg(format!(
            "top_k k={k} out of range for {} scores",
            scores.len()
        )));
    }
    let mut indices: Vec<usize> = (0..scores.len()).collect();
    // Stable sort keeps equal scores in ascending index order.
    indices.sort_by(|&a, &b| scores.data[b].total_cmp(&scores.data[a]));
    indices.truncate(k);
    Ok(indices)
}

/// Index of the single largest score (ties to the lower index).
pub fn argmax(scores: &Tensor) -> Result<usize> {
    Ok(top_k(scores, 1)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn t(data: Vec<f64>) -> Tensor {
        Tensor::from_vec(data).unwrap()
    }

    #[test]
    fn new_rejects_length_mismatch() {
        let shape = Shape::new(vec![2, 2]).unwrap();
        assert!(Tensor::new(shape, vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn new_rejects_non_finite() {
        assert!(Tensor::from_vec(vec![1.0, f64::NAN]).is_err());
        assert!(Tensor::from_vec(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn shape_rejects_zero_dims() {
        assert!(Shape::new(vec![2, 0, 3]).is_err());
        assert!(Shape::new(Vec::new()).is_err());
    }

    #[test]
    fn sign_basic() {
        let s = t(vec![-0.5, 0.0, 2.0]).sign();
        assert_eq!(s.data(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn sign_of_zeros_is_zeros() {
        let z = Tensor::zeros(Shape::new(vec![2, 2]).unwrap());
        assert_eq!(z.sign().data(), &[0.0; 4]);
    }

    #[test]
    fn sign_matches_elementwise_scan() {
        let mut rng = SplitMix64::new(123);
        let data: Vec<f64> = (0..100).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let tensor = t(data.clone());
        let signed = tensor.sign();
        for (i, &v) in data.iter().enumerate() {
            let expected = if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            };
            assert_eq!(signed.data()[i], expected, "element {i}");
        }
    }

    #[test]
    fn box_clamp_interior_point_unchanged() {
        let out = box_clamp(&t(vec![0.5]), &t(vec![0.0]), &t(vec![1.0])).unwrap();
        assert_eq!(out.data(), &[0.5]);
    }

    #[test]
    fn box_clamp_saturates() {
        let out = box_clamp(&t(vec![-3.0, 3.0]), &t(vec![0.0, 0.0]), &t(vec![1.0, 1.0])).unwrap();
        assert_eq!(out.data(), &[0.0, 1.0]);
    }

    #[test]
    fn box_clamp_matches_min_max_oracle() {
        let mut rng = SplitMix64::new(77);
        for _ in 0..1000 {
            let v = rng.uniform(-2.0, 2.0);
            let a = rng.uniform(-2.0, 2.0);
            let b = rng.uniform(-2.0, 2.0);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let out = box_clamp(&t(vec![v]), &t(vec![lo]), &t(vec![hi])).unwrap();
            assert_eq!(out.data()[0], hi.min(lo.max(v)));
        }
    }

    #[test]
    fn box_clamp_scalar_bounds_broadcast() {
        let out = box_clamp(&t(vec![-1.0, 0.5, 2.0]), &t(vec![0.0]), &t(vec![1.0])).unwrap();
        assert_eq!(out.data(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn box_clamp_rejects_shape_mismatch() {
        assert!(box_clamp(&t(vec![1.0, 2.0]), &t(vec![0.0, 0.0, 0.0]), &t(vec![1.0, 1.0])).is_err());
    }

    #[test]
    fn box_clamp_rejects_inverted_bounds() {
        assert!(box_clamp(&t(vec![0.5]), &t(vec![1.0]), &t(vec![0.0])).is_err());
    }

    #[test]
    fn top_k_argmax() {
        assert_eq!(top_k(&t(vec![0.1, 0.7, 0.2]), 1).unwrap(), vec![1]);
    }

    #[test]
    fn top_k_full_sort() {
        assert_eq!(top_k(&t(vec![0.1, 0.7, 0.2]), 3).unwrap(), vec![1, 2, 0]);
    }

    #[test]
    fn top_k_tie_breaks_to_lower_index() {
        assert_eq!(top_k(&t(vec![0.5, 0.5]), 1).unwrap(), vec![0]);
    }

    #[test]
    fn top_k_rejects_bad_k() {
        assert!(top_k(&t(vec![1.0, 2.0]), 0).is_err());
        assert!(top_k(&t(vec![1.0, 2.0]), 3).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn finite_vec(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(-1e6f64..1e6, 1..max_len)
        }

        proptest! {
            #[test]
            fn sign_is_idempotent(data in finite_vec(64)) {
                let tensor = Tensor::from_vec(data).unwrap();
                let once = tensor.sign();
                let twice = once.sign();
                prop_assert_eq!(twice.data(), once.data());
            }

            #[test]
            fn box_clamp_within_bounds_and_idempotent(
                data in finite_vec(64),
                lo in -10.0f64..0.0,
                width in 0.0f64..20.0,
            ) {
                let tensor = Tensor::from_vec(data).unwrap();
                let hi = lo + width;
                let lo_t = Tensor::from_vec(vec![lo]).unwrap();
                let hi_t = Tensor::from_vec(vec![hi]).unwrap();
                let clamped = box_clamp(&tensor, &lo_t, &hi_t).unwrap();
                for &v in clamped.data() {
                    prop_assert!(v >= lo && v <= hi);
                }
                let twice = box_clamp(&clamped, &lo_t, &hi_t).unwrap();
                prop_assert_eq!(twice.data(), clamped.data());
            }

            #[test]
            fn top_k_is_nested(data in finite_vec(32)) {
                let tensor = Tensor::from_vec(data).unwrap();
                let n = tensor.len();
                for k in 1..n {
                    let smaller: std::collections::HashSet<usize> =
                        top_k(&tensor, k).unwrap().into_iter().collect();
                    let larger: std::collections::HashSet<usize> =
                        top_k(&tensor, k + 1).unwrap().into_iter().collect();
                    prop_assert!(smaller.is_subset(&larger));
                }
            }
        }
    }
}
