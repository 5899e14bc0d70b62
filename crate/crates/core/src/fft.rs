//! Radix-2 FFTs.
//!
//! [`Fft`] is an in-place iterative decimation-in-time transform over
//! `Complex64`. [`RealFft`] packs an N-point real signal into an N/2-point
//! complex transform and returns the N/2+1 non-redundant bins.
//!
//! Conventions: the forward transform is unnormalized,
//! `X[k] = sum_n x[n] exp(-2 pi i k n / N)`, and every inverse carries the
//! `1/N` factor so that `inverse(forward(x)) == x`.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Complex FFT plan for one power-of-two length.
#[derive(Debug, Clone)]
pub struct Fft {
    len: usize,
    // stage with butterfly span h stores exp(-+2 pi i k / 2h), k < h, at [h - 1, 2h - 1)
    forward_twiddles: Vec<Complex64>,
    inverse_twiddles: Vec<Complex64>,
    bitrev: Vec<u32>,
}

impl Fft {
    /// # Panics
    ///
    /// If `len` is not a power of two.
    pub fn new(len: usize) -> Self {
        assert!(
            len.is_power_of_two(),
            "FFT length {len} is not a power of two"
        );
        let mut forward_twiddles = Vec::with_capacity(len.saturating_sub(1));
        let mut half = 1;
        while half < len {
            forward_twiddles.extend(
                (0..half).map(|k| Complex64::from_polar(1.0, -PI * k as f64 / half as f64)),
            );
            half *= 2;
        }
        let inverse_twiddles = forward_twiddles.iter().map(|w| w.conj()).collect();
        let bits = len.trailing_zeros();
        let bitrev = (0..len as u32)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (32 - bits)
                }
            })
            .collect();
        Fft {
            len,
            forward_twiddles,
            inverse_twiddles,
            bitrev,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.forward_twiddles);
    }

    /// Inverse transform including the `1/N` normalization.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.inverse_twiddles);
        let scale = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
    }

    fn transform(&self, buf: &mut [Complex64], twiddles: &[Complex64]) {
        assert_eq!(buf.len(), self.len, "buffer length does not match FFT plan");
        let n = self.len;
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if i < j {
                buf.swap(i, j);
            }
        }
        if n >= 2 {
            for pair in buf.chunks_exact_mut(2) {
                let (a, b) = (pair[0], pair[1]);
                pair[0] = a + b;
                pair[1] = a - b;
            }
        }
        let mut half = 2;
        while half < n {
            let w = &twiddles[half - 1..2 * half - 1];
            for block in buf.chunks_exact_mut(2 * half) {
                let (lo, hi) = block.split_at_mut(half);
                for ((a, b), w) in lo.iter_mut().zip(hi.iter_mut()).zip(w) {
                    let t = *b * w;
                    *b = *a - t;
                    *a += t;
                }
            }
            half *= 2;
        }
    }
}

/// Real-input FFT plan of even power-of-two length `N >= 4`.
#[derive(Debug, Clone)]
pub struct RealFft {
    len: usize,
    half: Fft,
    // exp(-2 pi i k / N), k <= N / 2
    twiddles: Vec<Complex64>,
}

impl RealFft {
    pub fn new(len: usize) -> Self {
        assert!(
            len.is_power_of_two() && len >= 4,
            "real FFT length {len} must be a power of two >= 4"
        );
        let twiddles = (0..=len / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / len as f64))
            .collect();
        RealFft {
            len,
            half: Fft::new(len / 2),
            twiddles,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bins(&self) -> usize {
        self.len / 2 + 1
    }

    pub fn make_spectrum(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.bins()]
    }

    /// Forward transform of `input` (length N) into `output` (length N/2+1).
    pub fn forward(&self, input: &[f64], output: &mut [Complex64]) {
        let n = self.len;
        let m = n / 2;
        assert_eq!(input.len(), n);
        assert_eq!(output.len(), m + 1);

        let mut z: Vec<Complex64> = input
            .chunks_exact(2)
            .map(|pair| Complex64::new(pair[0], pair[1]))
            .collect();
        self.half.forward(&mut z);

        for k in 0..=m {
            let zk = z[k % m];
            let zc = z[(m - k) % m].conj();
            let even = (zk + zc) * 0.5;
            let odd = (zk - zc) * Complex64::new(0.0, -0.5);
            output[k] = even + self.twiddles[k] * odd;
        }
        // bins 0 and N/2 are real for real input
        output[0].im = 0.0;
        output[m].im = 0.0;
    }

    /// Inverse of [`RealFft::forward`], including the `1/N` factor. The
    /// imaginary parts of bins 0 and N/2 are ignored.
    pub fn inverse(&self, input: &[Complex64], output: &mut [f64]) {
        let n = self.len;
        let m = n / 2;
        assert_eq!(input.len(), m + 1);
        assert_eq!(output.len(), n);

        let mut spec = input.to_vec();
        spec[0].im = 0.0;
        spec[m].im = 0.0;

        let mut z: Vec<Complex64> = (0..m)
            .map(|k| {
                let xk = spec[k];
                let xc = spec[m - k].conj();
                let even = (xk + xc) * 0.5;
                let odd = (xk - xc) * 0.5 * self.twiddles[k].conj();
                even + Complex64::new(0.0, 1.0) * odd
            })
            .collect();
        self.half.inverse(&mut z);
        for (pair, zm) in output.chunks_exact_mut(2).zip(&z) {
            pair[0] = zm.re;
            pair[1] = zm.im;
        }
    }
}
