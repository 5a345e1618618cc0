//! Gaussian-state bookkeeping: input covariances of the squeezed probe and
//! the coherent spin state, covariance propagation through a transfer
//! matrix, and spectral variance (Mandel parameter) estimation.
//!
//! States are symmetric two-point correlators of the stacked sample vector
//! `(Xi_I, Xi_III, T_I, T_III)`.  Delta-correlated noise discretizes as
//! `1/step` on the diagonal; spectra are quadratic forms in the orthonormal
//! cosine (standing-wave) mode basis, normalized so vacuum reads one.

use nalgebra::{DMatrix, DVector};

use crate::coupling::InterfaceParams;
use crate::error::{Error, Result};
use crate::propagator::{ChannelLabel, Grid, TransferMatrix};

/// Squeezed-vacuum statistics of the informative light mode: exponential
/// auto-correlations with strengths `xi1 < 0 <= xi3` and times `tau1 <= tau3`,
/// the output of a subthreshold degenerate parametric amplifier with cavity
/// loss rate `gamma_c` and downconversion efficiency `kappa_d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezedInput {
    pub xi1: f64,
    pub xi3: f64,
    pub tau1: f64,
    pub tau3: f64,
    pub gamma_c: f64,
    pub kappa_d: f64,
}

impl SqueezedInput {
    /// Build the minimal-uncertainty family member with anti-squeezing
    /// `xi3 >= 0` and correlation time `tau3` (the longest one, which limits
    /// the pulse duration).
    pub fn new(xi3: f64, tau3: f64) -> Result<Self> {
        if !(xi3 >= 0.0) || !(tau3 > 0.0) {
            return Err(Error::Domain(format!(
                "squeezed input needs xi3 >= 0 and tau3 > 0, got {xi3}, {tau3}"
            )));
        }
        // (1 + xi1)(1 + xi3) = 1 and the cavity relations
        //   tau1 = 1/(gamma_c/2 + kappa_d), tau3 = 1/(gamma_c/2 - kappa_d)
        // give gamma_c = (r + 1)/tau3, kappa_d = (r - 1)/(2 tau3), r = sqrt(1 + xi3).
        let r = (1.0 + xi3).sqrt();
        let xi1 = 1.0 / (1.0 + xi3) - 1.0;
        let gamma_c = (r + 1.0) / tau3;
        let kappa_d = (r - 1.0) / (2.0 * tau3);
        let out = SqueezedInput { xi1, xi3, tau1: tau3 / r, tau3, gamma_c, kappa_d };
        debug_assert!(out.check().is_ok());
        Ok(out)
    }

    pub fn vacuum() -> Self {
        SqueezedInput::new(0.0, 1.0).expect("vacuum parameters are valid")
    }

    /// Verify the minimal-uncertainty and cavity-time invariants.
    pub fn check(&self) -> Result<()> {
        let prod = (1.0 + self.xi1) * (1.0 + self.xi3);
        if (prod - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "(1+xi1)(1+xi3) = {prod}, not a minimal-uncertainty pair"
            )));
        }
        let t1 = 1.0 / (0.5 * self.gamma_c + self.kappa_d);
        let t3 = 1.0 / (0.5 * self.gamma_c - self.kappa_d);
        if (t1 - self.tau1).abs() > 1e-9 * self.tau1 || (t3 - self.tau3).abs() > 1e-9 * self.tau3
        {
            return Err(Error::Domain("cavity times inconsistent with rates".into()));
        }
        if self.tau3 < self.tau1 {
            return Err(Error::Domain("tau3 must be the longer correlation time".into()));
        }
        Ok(())
    }

    /// Analytic spectrum of the squeezed quadrature, `1 + xi1/(1 + (Omega tau1)^2)`.
    pub fn spectrum_squeezed(&self, omega: f64) -> f64 {
        1.0 + self.xi1 / (1.0 + (omega * self.tau1).powi(2))
    }

    /// Analytic spectrum of the anti-squeezed quadrature.
    pub fn spectrum_antisqueezed(&self, omega: f64) -> f64 {
        1.0 + self.xi3 / (1.0 + (omega * self.tau3).powi(2))
    }
}

/// Symmetric covariance of the stacked quadrature vector
/// `(Xi_I on the time grid, Xi_III, T_I on the space grid, T_III)`,
/// together with the shot-noise normalization constants.
#[derive(Debug, Clone)]
pub struct GaussianState {
    pub cov: DMatrix<f64>,
    pub grid: Grid,
    pub xi2_bar: f64,
    pub fz_bar: f64,
    pub cbar13: f64,
}

impl GaussianState {
    pub fn dim(&self) -> usize {
        2 * (self.grid.n_t + self.grid.n_z)
    }

    pub fn channel_len(&self, ch: ChannelLabel) -> usize {
        match ch {
            ChannelLabel::XiI | ChannelLabel::XiIII => self.grid.n_t,
            ChannelLabel::TI | ChannelLabel::TIII => self.grid.n_z,
        }
    }

    pub fn channel_offset(&self, ch: ChannelLabel) -> usize {
        let (nt, nz) = (self.grid.n_t, self.grid.n_z);
        match ch {
            ChannelLabel::XiI => 0,
            ChannelLabel::XiIII => nt,
            ChannelLabel::TI => 2 * nt,
            ChannelLabel::TIII => 2 * nt + nz,
        }
    }

    /// Copy of one covariance block.
    pub fn block(&self, row: ChannelLabel, col: ChannelLabel) -> DMatrix<f64> {
        self.cov
            .view(
                (self.channel_offset(row), self.channel_offset(col)),
                (self.channel_len(row), self.channel_len(col)),
            )
            .into_owned()
    }

    /// Shot-noise variance density of a channel: the diagonal value a fresh
    /// vacuum/coherent state carries there.
    pub fn shot(&self, ch: ChannelLabel) -> f64 {
        match ch {
            ChannelLabel::XiI | ChannelLabel::XiIII => self.xi2_bar / self.grid.dt(),
            ChannelLabel::TI | ChannelLabel::TIII => {
                0.5 * self.cbar13 * self.fz_bar.abs() / self.grid.dz()
            }
        }
    }

    /// Fresh input state: squeezed light plus the coherent-spin floor.
    pub fn input_state(
        sq: &SqueezedInput,
        grid: &Grid,
        params: &InterfaceParams,
        broadband: bool,
    ) -> Result<GaussianState> {
        sq.check()?;
        let (f11, f33) = input_field_covariance(sq, grid, params.xi2_bar, broadband)?;
        let spin = input_spin_covariance(grid, params.fz_bar, params.cbar13)?;
        let (nt, nz) = (grid.n_t, grid.n_z);
        let mut cov = DMatrix::zeros(2 * (nt + nz), 2 * (nt + nz));
        cov.view_mut((0, 0), (nt, nt)).copy_from(&f11);
        cov.view_mut((nt, nt), (nt, nt)).copy_from(&f33);
        cov.view_mut((2 * nt, 2 * nt), (nz, nz)).copy_from(&spin);
        cov.view_mut((2 * nt + nz, 2 * nt + nz), (nz, nz)).copy_from(&spin);
        Ok(GaussianState {
            cov,
            grid: *grid,
            xi2_bar: params.xi2_bar,
            fz_bar: params.fz_bar,
            cbar13: params.cbar13,
        })
    }

    /// Vacuum light and coherent spin, the no-signal reference.
    pub fn vacuum_state(grid: &Grid, params: &InterfaceParams) -> Result<GaussianState> {
        GaussianState::input_state(&SqueezedInput::vacuum(), grid, params, true)
    }

    /// Total noise in shot units: the trace of the covariance with every
    /// channel normalized to its own vacuum level.  The passive memory
    /// branch conserves this.
    pub fn normalized_trace(&self) -> f64 {
        let mut total = 0.0;
        for ch in [ChannelLabel::XiI, ChannelLabel::XiIII, ChannelLabel::TI, ChannelLabel::TIII] {
            let off = self.channel_offset(ch);
            let len = self.channel_len(ch);
            let shot = self.shot(ch);
            for i in 0..len {
                total += self.cov[(off + i, off + i)] / shot;
            }
        }
        total
    }
}

/// Input field covariance blocks `(Xi_I auto, Xi_III auto)` of the squeezed
/// probe, `xi2_bar [delta(t-t') + xi e^{-|t-t'|/tau}/(2 tau)]`, discretized
/// by cell averaging: entry `(i, j)` is the kernel integrated over cell i
/// and cell j divided by `dt^2`.  Averaging keeps the matrix positive
/// semidefinite for any `tau` (midpoint sampling goes negative once
/// `tau < dt`) and reproduces the broadband limit `(1+xi)/dt` as `tau -> 0`.
/// The `broadband` flag writes that limit directly.
pub fn input_field_covariance(
    sq: &SqueezedInput,
    grid: &Grid,
    xi2_bar: f64,
    broadband: bool,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(xi2_bar > 0.0) {
        return Err(Error::Domain("xi2_bar must be positive".into()));
    }
    let nt = grid.n_t;
    let dt = grid.dt();
    let build = |xi: f64, tau: f64| {
        let mut m = DMatrix::zeros(nt, nt);
        for i in 0..nt {
            for j in 0..=i {
                let mut v = if i == j { 1.0 / dt } else { 0.0 };
                if broadband {
                    if i == j {
                        v += xi / dt;
                    }
                } else if i == j {
                    // (1/dt^2) int int_cell e^{-|u-v|/tau}/(2 tau) = [1 - (tau/dt)(1 - e^{-dt/tau})]/dt
                    v += xi * (1.0 - tau / dt * (-(-dt / tau).exp_m1())) / dt;
                } else {
                    // distinct cells at lag d = |i-j| dt:
                    // (e^{(dt-d)/tau} + e^{-(dt+d)/tau} - 2 e^{-d/tau}) * tau / (2 dt^2)
                    let d = (i - j) as f64 * dt;
                    let sum = ((dt - d) / tau).exp() + (-(dt + d) / tau).exp()
                        - 2.0 * (-d / tau).exp();
                    v += xi * tau * sum / (2.0 * dt * dt);
                }
                let value = xi2_bar * v;
                m[(i, j)] = value;
                m[(j, i)] = value;
            }
        }
        m
    };
    Ok((build(sq.xi1, sq.tau1), build(sq.xi3, sq.tau3)))
}

/// Coherent-spin-state covariance block, shared by `T_I` and `T_III`:
/// `(cbar13 |fz_bar| / 2) delta_ij / dz`.  This saturates the uncertainty
/// bound of the alignment commutator.
pub fn input_spin_covariance(grid: &Grid, fz_bar: f64, cbar13: f64) -> Result<DMatrix<f64>> {
    if !(cbar13 > 0.0) || fz_bar == 0.0 {
        return Err(Error::Domain("spin covariance needs cbar13 > 0 and fz_bar != 0".into()));
    }
    let floor = 0.5 * cbar13 * fz_bar.abs() / grid.dz();
    Ok(DMatrix::from_diagonal_element(grid.n_z, grid.n_z, floor))
}

/// Propagate a state through a transfer matrix: `cov_out = M cov M^T`.
pub fn propagate(state: &GaussianState, tm: &TransferMatrix) -> Result<GaussianState> {
    if state.grid != tm.grid {
        return Err(Error::Dimension { expected: tm.grid.n_t, got: state.grid.n_t });
    }
    let rel = (state.xi2_bar - tm.params.xi2_bar).abs() / tm.params.xi2_bar.abs();
    if rel > 1e-9 {
        return Err(Error::Domain(
            "state shot normalization disagrees with the stage flux; rebuild the input state"
                .into(),
        ));
    }
    let m = tm.stacked();
    let cov = &m * &state.cov * m.transpose();
    Ok(GaussianState {
        cov,
        grid: state.grid,
        xi2_bar: tm.params.xi2_bar,
        fz_bar: tm.params.fz_bar,
        cbar13: tm.params.cbar13,
    })
}

/// A spectral variance curve normalized to shot noise.
#[derive(Debug, Clone)]
pub struct MandelSpectrum {
    pub channel: ChannelLabel,
    /// `Omega_k = pi k / T` for light, `q_k = pi k / L` for spin.
    pub abscissa: Vec<f64>,
    /// `1 + xi` per mode; vacuum reads one.
    pub values: Vec<f64>,
}

/// Orthonormal cosine mode `k` on `n` midpoint samples.
pub fn cosine_mode(n: usize, k: usize) -> DVector<f64> {
    let norm = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
    DVector::from_fn(n, |i, _| {
        norm * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n as f64).cos()
    })
}

/// Spectral variances of one channel in the standing-wave basis:
/// `value_k = u_k^T cov u_k / shot` with `u_k` the orthonormal cosine modes.
pub fn mandel_spectrum(state: &GaussianState, channel: ChannelLabel) -> MandelSpectrum {
    let n = state.channel_len(channel);
    let block = state.block(channel, channel);
    let shot = state.shot(channel);
    let extent = match channel {
        ChannelLabel::XiI | ChannelLabel::XiIII => state.grid.duration,
        ChannelLabel::TI | ChannelLabel::TIII => state.grid.length,
    };
    let mut abscissa = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        let u = cosine_mode(n, k);
        abscissa.push(std::f64::consts::PI * k as f64 / extent);
        values.push((u.transpose() * &block * &u)[(0, 0)] / shot);
    }
    MandelSpectrum { channel, abscissa, values }
}

/// Variance of the normalized mode projection on a channel pair:
/// `(u^T C_a u / shot_a, u^T C_b u / shot_b)` for the same mode vector.
pub fn mode_variance_pair(
    state: &GaussianState,
    primary: ChannelLabel,
    conjugate: ChannelLabel,
    mode: &DVector<f64>,
) -> (f64, f64) {
    let a = state.block(primary, primary);
    let b = state.block(conjugate, conjugate);
    let va = (mode.transpose() * &a * mode)[(0, 0)] / state.shot(primary);
    let vb = (mode.transpose() * &b * mode)[(0, 0)] / state.shot(conjugate);
    (va, vb)
}
