//! Mel-scale math and the learnable constrained filterbank.
//!
//! Every filter is `w_n(f) = g * shape(f; c_n, b_n)` with a fixed gain `g`.
//! Only the centers `c_n` and bandwidths `b_n` are learnable. Triangles are
//! symmetric with half-width `b_n`; Gaussians use `b_n` as the standard
//! deviation.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use ndarray::{Array2, Axis};

use crate::{Error, Result};

/// Floor added before the log so silent frames stay finite.
pub const DEFAULT_LOG_EPS: f64 = 1e-6;

pub fn hz_to_mel(f: f64) -> Result<f64> {
    if f < 0.0 {
        return Err(Error::NegativeFrequency(f));
    }
    Ok(2595.0 * (1.0 + f / 700.0).log10())
}

pub fn mel_to_hz(m: f64) -> Result<f64> {
    if m < 0.0 {
        return Err(Error::NegativeMel(m));
    }
    Ok(700.0 * (10f64.powf(m / 2595.0) - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterShape {
    Triangular,
    Gaussian,
}

impl FilterShape {
    /// Filter response at frequency `f`.
    #[inline]
    pub fn response(self, f: f64, center: f64, bandwidth: f64, gain: f64) -> f64 {
        let d = f - center;
        match self {
            FilterShape::Triangular => gain * (1.0 - d.abs() / bandwidth).max(0.0),
            FilterShape::Gaussian => gain * (-(d * d) / (2.0 * bandwidth * bandwidth)).exp(),
        }
    }

    /// Partial derivatives `(dw/dc, dw/db)` at frequency `f`.
    ///
    /// The triangle is not differentiable at its peak and at its support
    /// edges; both partials are taken as zero there.
    #[inline]
    pub fn partials(self, f: f64, center: f64, bandwidth: f64, gain: f64) -> (f64, f64) {
        let d = f - center;
        match self {
            FilterShape::Triangular => {
                let a = d.abs();
                if a > 0.0 && a < bandwidth {
                    (
                        gain * d.signum() / bandwidth,
                        gain * a / (bandwidth * bandwidth),
                    )
                } else {
                    (0.0, 0.0)
                }
            }
            FilterShape::Gaussian => {
                let w = self.response(f, center, bandwidth, gain);
                let b2 = bandwidth * bandwidth;
                (w * d / b2, w * d * d / (b2 * bandwidth))
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FilterShape::Triangular => "triangular",
            FilterShape::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for FilterShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triangular" => Ok(FilterShape::Triangular),
            "gaussian" => Ok(FilterShape::Gaussian),
            other => Err(Error::InvalidConfig(format!(
                "unknown filter shape `{other}`"
            ))),
        }
    }
}

/// Box constraint on centers and bandwidths, in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampBounds {
    pub c_min: f64,
    pub c_max: f64,
    pub b_min: f64,
    pub b_max: f64,
}

impl ClampBounds {
    /// Centers anywhere in `[0, nyquist]`, bandwidths from one bin up to nyquist.
    pub fn for_band(sample_rate: u32, n_fft: usize) -> Self {
        let nyquist = sample_rate as f64 / 2.0;
        Self {
            c_min: 0.0,
            c_max: nyquist,
            b_min: sample_rate as f64 / n_fft as f64,
            b_max: nyquist,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.c_min <= self.c_max && self.b_min > 0.0 && self.b_min <= self.b_max;
        if ok
            && [self.c_min, self.c_max, self.b_min, self.b_max]
                .iter()
                .all(|v| v.is_finite())
        {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "invalid clamp bounds {self:?}"
            )))
        }
    }

    pub fn contains(&self, center: f64, bandwidth: f64) -> bool {
        (self.c_min..=self.c_max).contains(&center)
            && (self.b_min..=self.b_max).contains(&bandwidth)
    }
}

/// Learnable state of the front-end.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterbankParams {
    pub centers: Vec<f64>,
    pub bandwidths: Vec<f64>,
    gain: f64,
    pub shape: FilterShape,
    pub clamp: ClampBounds,
    pub sort_enabled: bool,
}

impl FilterbankParams {
    pub fn new(
        centers: Vec<f64>,
        bandwidths: Vec<f64>,
        gain: f64,
        shape: FilterShape,
        clamp: ClampBounds,
        sort_enabled: bool,
    ) -> Result<Self> {
        if centers.len() != bandwidths.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} centers but {} bandwidths",
                centers.len(),
                bandwidths.len()
            )));
        }
        if centers.is_empty() {
            return Err(Error::InvalidConfig(
                "a filterbank needs at least one filter".into(),
            ));
        }
        clamp.validate()?;
        if !(gain.is_finite() && gain > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gain {gain} must be positive"
            )));
        }
        Ok(Self {
            centers,
            bandwidths,
            gain,
            shape,
            clamp,
            sort_enabled,
        })
    }

    pub fn n_filters(&self) -> usize {
        self.centers.len()
    }

    /// Centers and bandwidths; the gain is fixed.
    pub fn n_learnable(&self) -> usize {
        self.centers.len() + self.bandwidths.len()
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn within_bounds(&self) -> bool {
        self.centers
            .iter()
            .zip(&self.bandwidths)
            .all(|(&c, &b)| self.clamp.contains(c, b))
    }

    pub fn centers_sorted(&self) -> bool {
        self.centers.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Mel-spaced edge frequencies `f_0..f_{n+1}` in Hz.
fn mel_edges(n_filters: usize, f_min: f64, f_max: f64) -> Result<Vec<f64>> {
    let lo = hz_to_mel(f_min)?;
    let hi = hz_to_mel(f_max)?;
    let step = (hi - lo) / (n_filters + 1) as f64;
    (0..n_filters + 2)
        .map(|i| mel_to_hz(lo + i as f64 * step))
        .collect()
}

fn check_range(n_filters: usize, f_min: f64, f_max: f64) -> Result<()> {
    if n_filters == 0 {
        return Err(Error::InvalidConfig("n_filters must be at least 1".into()));
    }
    if !(f_min >= 0.0 && f_min < f_max) {
        return Err(Error::InvalidRange { f_min, f_max });
    }
    Ok(())
}

/// Places `n_filters` symmetric filters on the Mel scale between `f_min` and
/// `f_max`: center `f_n`, half-width `(f_{n+1} - f_{n-1}) / 2`, unit gain.
pub fn init_mel_params(
    n_filters: usize,
    f_min: f64,
    f_max: f64,
    shape: FilterShape,
    clamp: ClampBounds,
    sort_enabled: bool,
) -> Result<FilterbankParams> {
    check_range(n_filters, f_min, f_max)?;
    let edges = mel_edges(n_filters, f_min, f_max)?;
    let centers = edges[1..=n_filters].to_vec();
    let bandwidths = edges.windows(3).map(|w| (w[2] - w[0]) / 2.0).collect();
    FilterbankParams::new(centers, bandwidths, 1.0, shape, clamp, sort_enabled)
}

/// Filter weights sampled on the spectrogram bins, one row per filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterbankMatrix {
    pub weights: Array2<f64>,
    pub freq_grid: Vec<f64>,
}

impl FilterbankMatrix {
    pub fn n_filters(&self) -> usize {
        self.weights.nrows()
    }

    /// Summed response of all filters at every grid frequency.
    pub fn cumulative(&self) -> Vec<f64> {
        self.weights.sum_axis(Axis(0)).to_vec()
    }

    /// CSV with header `freq_hz,filter_0,...,filter_{n-1},cumulative`, one
    /// row per grid frequency.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "freq_hz")?;
        for n in 0..self.n_filters() {
            write!(out, ",filter_{n}")?;
        }
        writeln!(out, ",cumulative")?;
        let cumulative = self.cumulative();
        for (k, f) in self.freq_grid.iter().enumerate() {
            write!(out, "{f}")?;
            for w in self.weights.column(k) {
                write!(out, ",{w}")?;
            }
            writeln!(out, ",{}", cumulative[k])?;
        }
        out.flush()
    }
}

pub fn build_filter_matrix(params: &FilterbankParams, freq_grid: &[f64]) -> FilterbankMatrix {
    let weights = Array2::from_shape_fn((params.n_filters(), freq_grid.len()), |(n, k)| {
        params.shape.response(
            freq_grid[k],
            params.centers[n],
            params.bandwidths[n],
            params.gain,
        )
    });
    FilterbankMatrix {
        weights,
        freq_grid: freq_grid.to_vec(),
    }
}

/// Classic fixed FBank matrix: symmetric unit-gain triangles on Mel-spaced
/// edges. This is the frozen reference the learnable path starts from.
pub fn fixed_fbank(
    n_filters: usize,
    f_min: f64,
    f_max: f64,
    freq_grid: &[f64],
) -> Result<FilterbankMatrix> {
    check_range(n_filters, f_min, f_max)?;
    let edges = mel_edges(n_filters, f_min, f_max)?;
    let mut weights = Array2::zeros((n_filters, freq_grid.len()));
    for (n, mut row) in weights.rows_mut().into_iter().enumerate() {
        let center = edges[n + 1];
        let half_width = (edges[n + 2] - edges[n]) / 2.0;
        for (w, &f) in row.iter_mut().zip(freq_grid) {
            *w = 1.0 * (1.0 - (f - center).abs() / half_width).max(0.0);
        }
    }
    Ok(FilterbankMatrix {
        weights,
        freq_grid: freq_grid.to_vec(),
    })
}

fn check_grid(spec: &crate::signal::PowerSpectrogram, freq_grid: &[f64]) -> Result<()> {
    if spec.bin_freqs.as_slice() != freq_grid {
        return Err(Error::DimensionMismatch(format!(
            "filterbank grid has {} frequencies, spectrogram has {} bins",
            freq_grid.len(),
            spec.bin_freqs.len()
        )));
    }
    Ok(())
}

/// Filterbank energies `out[n][t] = sum_k W[n][k] * P[t][k]`.
pub fn apply_filterbank(
    spec: &crate::signal::PowerSpectrogram,
    matrix: &FilterbankMatrix,
) -> Result<Array2<f64>> {
    check_grid(spec, &matrix.freq_grid)?;
    Ok(matrix.weights.dot(&spec.values.t()))
}

/// Elementwise `ln(M + eps)`.
pub fn log_compress(energies: &Array2<f64>, eps: f64) -> Array2<f64> {
    energies.mapv(|m| (m + eps).ln())
}

/// Projects centers and bandwidths into the clamp box.
pub fn clamp_params(params: &FilterbankParams) -> FilterbankParams {
    let b = params.clamp;
    let mut out = params.clone();
    for c in &mut out.centers {
        *c = c.max(b.c_min).min(b.c_max);
    }
    for w in &mut out.bandwidths {
        *w = w.max(b.b_min).min(b.b_max);
    }
    out
}

/// Reorders `(center, bandwidth)` pairs so centers ascend; ties keep their order.
pub fn sort_params(params: &FilterbankParams) -> FilterbankParams {
    let mut pairs: Vec<(f64, f64)> = params
        .centers
        .iter()
        .copied()
        .zip(params.bandwidths.iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = params.clone();
    (out.centers, out.bandwidths) = pairs.into_iter().unzip();
    out
}

/// Clamp, then sort when the parameters ask for it.
pub fn project(params: &FilterbankParams) -> FilterbankParams {
    let clamped = clamp_params(params);
    if clamped.sort_enabled {
        sort_params(&clamped)
    } else {
        clamped
    }
}

/// Loss gradient with respect to every center and bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterGrads {
    pub centers: Vec<f64>,
    pub bandwidths: Vec<f64>,
}

impl FilterGrads {
    pub fn zeros(n_filters: usize) -> Self {
        Self {
            centers: vec![0.0; n_filters],
            bandwidths: vec![0.0; n_filters],
        }
    }

    pub fn add_assign(&mut self, other: &FilterGrads) {
        for (a, b) in self.centers.iter_mut().zip(&other.centers) {
            *a += b;
        }
        for (a, b) in self.bandwidths.iter_mut().zip(&other.bandwidths) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.centers
            .iter_mut()
            .chain(self.bandwidths.iter_mut())
            .for_each(|g| *g *= s);
    }
}

/// Backpropagates `grad_energies = dL/dM` (filters x frames) to the filter
/// parameters.
pub fn filterbank_backward(
    spec: &crate::signal::PowerSpectrogram,
    params: &FilterbankParams,
    grad_energies: &Array2<f64>,
) -> Result<FilterGrads> {
    let n = params.n_filters();
    if grad_energies.dim() != (n, spec.n_frames()) {
        return Err(Error::DimensionMismatch(format!(
            "gradient is {:?}, expected ({n}, {})",
            grad_energies.dim(),
            spec.n_frames()
        )));
    }
    // dL/dW[n][k] = sum_t G[n][t] P[t][k]
    let grad_weights = grad_energies.dot(&spec.values);
    let mut grads = FilterGrads::zeros(n);
    for (i, row) in grad_weights.rows().into_iter().enumerate() {
        let (c, b) = (params.centers[i], params.bandwidths[i]);
        let (mut gc, mut gb) = (0.0, 0.0);
        for (&gw, &f) in row.iter().zip(&spec.bin_freqs) {
            let (dc, db) = params.shape.partials(f, c, b, params.gain);
            gc += gw * dc;
            gb += gw * db;
        }
        grads.centers[i] = gc;
        grads.bandwidths[i] = gb;
    }
    Ok(grads)
}

/// Routes `dL/dF` through `F = ln(M + eps)`.
pub fn log_backward(energies: &Array2<f64>, grad_features: &Array2<f64>, eps: f64) -> Array2<f64> {
    let mut g = grad_features.clone();
    g.zip_mut_with(energies, |g, &m| *g /= m + eps);
    g
}

/// Gradient of the composed `ln(apply_filterbank(P, W(params)) + eps)` map,
/// given `dL/dF` for its output.
pub fn frontend_backward(
    spec: &crate::signal::PowerSpectrogram,
    params: &FilterbankParams,
    grad_features: &Array2<f64>,
    eps: f64,
) -> Result<FilterGrads> {
    let matrix = build_filter_matrix(params, &spec.bin_freqs);
    let energies = apply_filterbank(spec, &matrix)?;
    if energies.dim() != grad_features.dim() {
        return Err(Error::DimensionMismatch(format!(
            "feature gradient is {:?}, features are {:?}",
            grad_features.dim(),
            energies.dim()
        )));
    }
    filterbank_backward(spec, params, &log_backward(&energies, grad_features, eps))
}
