//! Adaptive step sizes from a sliding window of squared gradients.

/// Per-coordinate step sizes ρ_k = scale / (offset + √s_k), where s_k sums
/// the squared gradients of the last `window` iterations.
///
/// The window is a ring buffer; s is re-summed oldest-to-newest on every
/// step, so it equals the brute-force sum exactly.
#[derive(Clone, Debug)]
pub struct WindowedAdagrad {
    dim: usize,
    window: usize,
    squares: Vec<f64>,
    next: usize,
    filled: usize,
    sums: Vec<f64>,
}

impl WindowedAdagrad {
    pub fn new(dim: usize, window: usize) -> Self {
        assert!(window >= 1, "window must be at least 1");
        WindowedAdagrad {
            dim,
            window,
            squares: vec![0.0; dim * window],
            next: 0,
            filled: 0,
            sums: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of gradients currently held (at most `window`).
    pub fn len(&self) -> usize {
        self.filled
    }

    pub fn is_empty(&self) -> bool {
        self.filled == 0
    }

    /// Current windowed sums s_k.
    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    /// Push `grad`, evicting the oldest entry when full, and return ρ.
    pub fn step(&mut self, grad: &[f64], scale: f64, offset: f64) -> Vec<f64> {
        self.push(grad);
        self.rates(scale, offset)
    }

    /// Record `grad` without computing step sizes.
    pub fn push(&mut self, grad: &[f64]) {
        assert_eq!(grad.len(), self.dim, "gradient dimension");
        let slot = self.next * self.dim;
        for (dst, g) in self.squares[slot..slot + self.dim].iter_mut().zip(grad) {
            *dst = g * g;
        }
        self.next = (self.next + 1) % self.window;
        self.filled = (self.filled + 1).min(self.window);

        let oldest = (self.next + self.window - self.filled) % self.window;
        self.sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..self.filled {
            let row = ((oldest + j) % self.window) * self.dim;
            for (s, sq) in self.sums.iter_mut().zip(&self.squares[row..row + self.dim]) {
                *s += sq;
            }
        }
    }

    /// ρ from the gradients held now.
    pub fn rates(&self, scale: f64, offset: f64) -> Vec<f64> {
        self.sums.iter().map(|s| scale / (offset + s.sqrt())).collect()
    }
}
