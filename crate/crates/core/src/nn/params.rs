/// Uniform access to the trainable parameters of a layer or model.
///
/// Gradients are represented by a value of the same type, so the slice order
/// of `params()` on a model and on its gradient always lines up.
pub trait Params {
    fn params(&self) -> Vec<&[f64]>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn zeros_like(&self) -> Self
    where
        Self: Clone,
    {
        let mut z = self.clone();
        for p in z.params_mut() {
            p.fill(0.0);
        }
        z
    }

    /// `self += scale * other`, slice by slice in a fixed order.
    fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (dst, src) in self.params_mut().into_iter().zip(other.params()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    fn scale(&mut self, factor: f64) {
        for p in self.params_mut() {
            for v in p.iter_mut() {
                *v *= factor;
            }
        }
    }

    fn flat_params(&self) -> Vec<f64> {
        self.params().concat()
    }
}
