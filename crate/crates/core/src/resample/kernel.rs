//! Reconstruction kernels. Every kernel is even and vanishes outside its
//! support radius.

use std::f64::consts::PI;

/// Cubic-convolution parameter of the Catmull-Rom family.
pub const BICUBIC_A: f64 = -0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// Tent filter with support 1 (bilinear).
    Triangle,
    /// Keys cubic convolution with parameter `a`, support 2.
    Cubic { a: f64 },
    /// Windowed sinc with `lobes` lobes, support `lobes`.
    Lanczos { lobes: u32 },
}

impl Kernel {
    pub fn bicubic() -> Self {
        Kernel::Cubic { a: BICUBIC_A }
    }

    /// `taps` is the kernel footprint in one dimension (4, 6 or 8).
    pub fn lanczos_taps(taps: u32) -> Self {
        Kernel::Lanczos { lobes: taps / 2 }
    }

    pub fn support(&self) -> f64 {
        match *self {
            Kernel::Triangle => 1.0,
            Kernel::Cubic { .. } => 2.0,
            Kernel::Lanczos { lobes } => lobes as f64,
        }
    }

    pub fn weight(&self, t: f64) -> f64 {
        let x = t.abs();
        if x >= self.support() {
            return 0.0;
        }
        match *self {
            Kernel::Triangle => 1.0 - x,
            Kernel::Cubic { a } => {
                if x < 1.0 {
                    ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
                } else {
                    ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
                }
            }
            Kernel::Lanczos { lobes } => sinc(x) * sinc(x / lobes as f64),
        }
    }
}

/// Normalized sinc, `sin(pi x) / (pi x)`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Evaluates `kernel` at signed offset `t`.
pub fn kernel_weight(kernel: Kernel, t: f64) -> f64 {
    kernel.weight(t)
}
