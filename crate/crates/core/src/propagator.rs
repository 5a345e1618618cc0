//! Input/output transfer matrices of the interface and their verification.
//!
//! In the rotated frame and without retardation the Heisenberg equations
//! reduce, per channel pair, to
//!
//! ```text
//!   d/dz Xi(z,t) = sigma_f * g_f * T(z,t)      g_f = 2 epsilon xi2_bar
//!   d/dt T(z,t)  = sigma_a * g_a * Xi(z,t)     g_a = cbar13 epsilon fz_bar
//! ```
//!
//! with `(sigma_f, sigma_a) = (-1, +1)` on channel I and `(+1, -1)` on
//! channel III.  The closed-form solution is an integral transform whose
//! self-coupling kernels are weakly singular `J1`/`I1` convolutions and whose
//! cross kernels are smooth `J0`/`I0` evaluations; `A < 0` selects the
//! ordinary Bessel (memory) branch and `A > 0` the modified (entanglement)
//! branch.  This module discretizes those transforms on a midpoint grid,
//! integrating the singular diagonal cells exactly, and provides a
//! brute-force integrator of the differential system as an oracle.

use nalgebra::{DMatrix, DVector};

use crate::bessel::{i0, i0_cell, i1_kernel_cell, j0, j0_cell, j1_kernel_cell};
use crate::coupling::InterfaceParams;
use crate::error::{Error, Result};

/// Uniform space-time grid; samples sit at cell midpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub n_t: usize,
    pub n_z: usize,
    pub duration: f64,
    pub length: f64,
}

impl Grid {
    pub fn new(n_t: usize, n_z: usize, duration: f64, length: f64) -> Result<Self> {
        if n_t < 2 || n_z < 2 {
            return Err(Error::Domain(format!(
                "grid needs at least 2 points per axis, got {n_t} x {n_z}"
            )));
        }
        if !(duration > 0.0 && length > 0.0) {
            return Err(Error::Domain("grid extents must be positive".into()));
        }
        Ok(Grid { n_t, n_z, duration, length })
    }

    pub fn dt(&self) -> f64 {
        self.duration / self.n_t as f64
    }

    pub fn dz(&self) -> f64 {
        self.length / self.n_z as f64
    }

    pub fn t_mid(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dt()
    }

    pub fn z_mid(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dz()
    }
}

/// Which Bessel family the transfer uses, set by the sign of `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `A < 0`: passive state exchange, `J` kernels.
    Memory,
    /// `A > 0`: parametric amplification, `I` kernels.
    Entanglement,
}

/// Conjugate channel pair selector; I couples `Xi_I` with `T_I`, III couples
/// `Xi_III` with `T_III`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    I,
    III,
}

impl Channel {
    /// `(sigma_f, sigma_a)` drive signs of the wave equations.
    pub fn signs(self) -> (f64, f64) {
        match self {
            Channel::I => (-1.0, 1.0),
            Channel::III => (1.0, -1.0),
        }
    }
}

/// Quadrature channel label for sampled data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelLabel {
    XiI,
    XiIII,
    TI,
    TIII,
}

/// One sampled quadrature channel on its grid axis.
#[derive(Debug, Clone)]
pub struct QuadratureChannel {
    pub label: ChannelLabel,
    pub samples: DVector<f64>,
}

/// Discretized input/output map of one interaction stage.
///
/// Blocks are stored with the channel-I signs baked in; channel III uses the
/// same self blocks and the negated cross blocks:
///
/// ```text
///   Xi_I^out   = k_ff f_I   + k_fa a_I        T_I^out   = k_aa a_I   + k_af f_I
///   Xi_III^out = k_ff f_III - k_fa a_III      T_III^out = k_aa a_III - k_af f_III
/// ```
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    pub k_ff: DMatrix<f64>,
    pub k_fa: DMatrix<f64>,
    pub k_af: DMatrix<f64>,
    pub k_aa: DMatrix<f64>,
    pub branch: Branch,
    pub grid: Grid,
    pub params: InterfaceParams,
}

impl TransferMatrix {
    /// Stacked map on the vector `(Xi_I, Xi_III, T_I, T_III)`.
    pub fn stacked(&self) -> DMatrix<f64> {
        let (nt, nz) = (self.grid.n_t, self.grid.n_z);
        let n = 2 * (nt + nz);
        let mut m = DMatrix::zeros(n, n);
        m.view_mut((0, 0), (nt, nt)).copy_from(&self.k_ff);
        m.view_mut((nt, nt), (nt, nt)).copy_from(&self.k_ff);
        m.view_mut((0, 2 * nt), (nt, nz)).copy_from(&self.k_fa);
        m.view_mut((nt, 2 * nt + nz), (nt, nz)).copy_from(&(-&self.k_fa));
        m.view_mut((2 * nt, 0), (nz, nt)).copy_from(&self.k_af);
        m.view_mut((2 * nt + nz, nt), (nz, nt)).copy_from(&(-&self.k_af));
        m.view_mut((2 * nt, 2 * nt), (nz, nz)).copy_from(&self.k_aa);
        m.view_mut((2 * nt + nz, 2 * nt + nz), (nz, nz)).copy_from(&self.k_aa);
        m
    }
}

// ---------------------------------------------------------------------------
// frame rotation

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameDirection {
    /// Lab frame -> interaction frame.
    In,
    /// Interaction frame -> lab frame.
    Out,
}

/// Rotate a pair of Stokes samples between the lab and interaction frames,
/// `Xi_I = cos(phi) Xi_1 - sin(phi) Xi_3`, `Xi_III = sin(phi) Xi_1 + cos(phi) Xi_3`,
/// with `phi(z, t) = kappa1 z + omega_bar t` evaluated per sample.
pub fn rotate_field_frame(
    direction: FrameDirection,
    kappa1: f64,
    omega_bar: f64,
    z: f64,
    grid: &Grid,
    a: &DVector<f64>,
    b: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let phis: Vec<f64> = (0..grid.n_t).map(|i| kappa1 * z + omega_bar * grid.t_mid(i)).collect();
    rotate_pair(direction, &phis, a, b, RotationKind::Field)
}

/// Rotate a pair of alignment samples; the spin pair transforms with the
/// opposite rotation sense,
/// `T_I = cos(phi) T_xy + sin(phi) T_xieta`, `T_III = -sin(phi) T_xy + cos(phi) T_xieta`.
pub fn rotate_spin_frame(
    direction: FrameDirection,
    kappa1: f64,
    omega_bar: f64,
    t: f64,
    grid: &Grid,
    a: &DVector<f64>,
    b: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let phis: Vec<f64> = (0..grid.n_z).map(|j| kappa1 * grid.z_mid(j) + omega_bar * t).collect();
    rotate_pair(direction, &phis, a, b, RotationKind::Spin)
}

enum RotationKind {
    Field,
    Spin,
}

fn rotate_pair(
    direction: FrameDirection,
    phis: &[f64],
    a: &DVector<f64>,
    b: &DVector<f64>,
    kind: RotationKind,
) -> (DVector<f64>, DVector<f64>) {
    assert_eq!(a.len(), phis.len());
    assert_eq!(b.len(), phis.len());
    let mut out_a = DVector::zeros(a.len());
    let mut out_b = DVector::zeros(b.len());
    for (i, &phi) in phis.iter().enumerate() {
        let (c, s) = (phi.cos(), phi.sin());
        // the spin pair rotates by -phi relative to the field pair
        let s = match kind {
            RotationKind::Field => s,
            RotationKind::Spin => -s,
        };
        let (c, s) = match direction {
            FrameDirection::In => (c, s),
            FrameDirection::Out => (c, -s),
        };
        out_a[i] = c * a[i] - s * b[i];
        out_b[i] = s * a[i] + c * b[i];
    }
    (out_a, out_b)
}

// ---------------------------------------------------------------------------
// transfer matrix construction

/// Build the discretized transfer matrix for the stage described by `params`.
///
/// The weakly singular `J1`/`I1` self-kernels are integrated exactly over
/// each quadrature cell through their `J0`/`I0` antiderivatives; the smooth
/// `J0`/`I0` cross kernels use the midpoint rule.
pub fn build_transfer(params: &InterfaceParams, grid: &Grid) -> Result<TransferMatrix> {
    let a_coop = params.cooperative_a();
    if a_coop == 0.0 {
        return Err(Error::DegenerateCoupling);
    }
    let branch = if a_coop < 0.0 { Branch::Memory } else { Branch::Entanglement };
    let a = a_coop.abs();
    let (nt, nz) = (grid.n_t, grid.n_z);
    let (dt, dz) = (grid.dt(), grid.dz());
    let (gf, ga) = (params.field_drive(), params.spin_drive());

    let cell = |c: f64, lo: f64, hi: f64| match branch {
        Branch::Memory => -j1_kernel_cell(c, lo, hi),
        Branch::Entanglement => i1_kernel_cell(c, lo, hi),
    };
    let smooth_cell = |c: f64, lo: f64, hi: f64| match branch {
        Branch::Memory => j0_cell(c, lo, hi),
        Branch::Entanglement => i0_cell(c, lo, hi),
    };

    // field self block: Volterra convolution in t with c = a L
    let mut k_ff = DMatrix::identity(nt, nt);
    let c_f = a * grid.length;
    for i in 0..nt {
        let ti = grid.t_mid(i);
        for j in 0..=i {
            let hi = ti - j as f64 * dt;
            let lo = (ti - (j + 1) as f64 * dt).max(0.0);
            k_ff[(i, j)] += cell(c_f, lo, hi);
        }
    }

    // spin self block: same structure in z with c = a T
    let mut k_aa = DMatrix::identity(nz, nz);
    let c_a = a * grid.duration;
    for i in 0..nz {
        let zi = grid.z_mid(i);
        for j in 0..=i {
            let hi = zi - j as f64 * dz;
            let lo = (zi - (j + 1) as f64 * dz).max(0.0);
            k_aa[(i, j)] += cell(c_a, lo, hi);
        }
    }

    // cross blocks, channel-I signs: field_I -= g_f integral, spin_I += g_a integral;
    // the smooth kernels are integrated exactly over each source cell
    let mut k_fa = DMatrix::zeros(nt, nz);
    for i in 0..nt {
        let c = a * grid.t_mid(i);
        for j in 0..nz {
            let lo = grid.length - (j + 1) as f64 * dz;
            k_fa[(i, j)] = -gf * smooth_cell(c, lo.max(0.0), lo + dz);
        }
    }
    let mut k_af = DMatrix::zeros(nz, nt);
    for i in 0..nz {
        let c = a * grid.z_mid(i);
        for j in 0..nt {
            let lo = grid.duration - (j + 1) as f64 * dt;
            k_af[(i, j)] = ga * smooth_cell(c, lo.max(0.0), lo + dt);
        }
    }

    Ok(TransferMatrix { k_ff, k_fa, k_af, k_aa, branch, grid: *grid, params: *params })
}

/// Apply a transfer matrix to sampled input channels.
pub fn apply_transfer(
    tm: &TransferMatrix,
    field_in: (&QuadratureChannel, &QuadratureChannel),
    spin_in: (&QuadratureChannel, &QuadratureChannel),
) -> Result<((QuadratureChannel, QuadratureChannel), (QuadratureChannel, QuadratureChannel))> {
    let (f1, f3) = field_in;
    let (a1, a3) = spin_in;
    for (ch, want) in
        [(f1, tm.grid.n_t), (f3, tm.grid.n_t), (a1, tm.grid.n_z), (a3, tm.grid.n_z)]
    {
        if ch.samples.len() != want {
            return Err(Error::Dimension { expected: want, got: ch.samples.len() });
        }
    }
    let xi_i = &tm.k_ff * &f1.samples + &tm.k_fa * &a1.samples;
    let xi_iii = &tm.k_ff * &f3.samples - &tm.k_fa * &a3.samples;
    let t_i = &tm.k_aa * &a1.samples + &tm.k_af * &f1.samples;
    let t_iii = &tm.k_aa * &a3.samples - &tm.k_af * &f3.samples;
    Ok((
        (
            QuadratureChannel { label: ChannelLabel::XiI, samples: xi_i },
            QuadratureChannel { label: ChannelLabel::XiIII, samples: xi_iii },
        ),
        (
            QuadratureChannel { label: ChannelLabel::TI, samples: t_i },
            QuadratureChannel { label: ChannelLabel::TIII, samples: t_iii },
        ),
    ))
}

// ---------------------------------------------------------------------------
// commutator preservation

/// Heaviside step with the midpoint convention at coincidence.
fn theta(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Discretized commutator form of the input variables on the stacked
/// ordering `(Xi_I, Xi_III, T_I, T_III)`: `omega[a][b] = [v_a, v_b]/i`.
fn input_commutator_form(tm: &TransferMatrix) -> DMatrix<f64> {
    let (nt, nz) = (tm.grid.n_t, tm.grid.n_z);
    let n = 2 * (nt + nz);
    let mut omega = DMatrix::zeros(n, n);
    // [Xi_I(t), Xi_III(t')] = -2 i xi2_bar delta(t - t')
    let field = -2.0 * tm.params.xi2_bar / tm.grid.dt();
    for i in 0..nt {
        omega[(i, nt + i)] = field;
        omega[(nt + i, i)] = -field;
    }
    // [T_I(z), T_III(z')] = + i cbar13 fz_bar delta(z - z')
    let spin = tm.params.cbar13 * tm.params.fz_bar / tm.grid.dz();
    for j in 0..nz {
        omega[(2 * nt + j, 2 * nt + nz + j)] = spin;
        omega[(2 * nt + nz + j, 2 * nt + j)] = -spin;
    }
    omega
}

/// Target commutator form of the output variables.  The field and spin
/// blocks repeat the input form; the field/spin cross blocks carry the
/// theta-function window `[theta(t - t') - theta(z' - z)]`, which vanishes
/// identically on the output sampling (field at `z = L, t < T`, spin at
/// `z' < L, t' = T`), so outputs commute across subsystems.
fn target_commutator_form(tm: &TransferMatrix) -> DMatrix<f64> {
    let (nt, nz) = (tm.grid.n_t, tm.grid.n_z);
    let mut omega = input_commutator_form(tm);
    let p = &tm.params;
    let a_coop = p.cooperative_a();
    let amp = -2.0 * p.cbar13 * p.epsilon * p.xi2_bar * p.fz_bar;
    let kernel = |arg2: f64| match tm.branch {
        Branch::Memory => j0(2.0 * arg2.abs().sqrt()),
        Branch::Entanglement => i0(2.0 * arg2.abs().sqrt()),
    };
    // the g-matrix couples Xi_I with T_III and Xi_III with T_I
    for i in 0..nt {
        let t = tm.grid.t_mid(i);
        for j in 0..nz {
            let zp = tm.grid.z_mid(j);
            let window = theta(t - tm.grid.duration) - theta(zp - tm.grid.length);
            if window != 0.0 {
                let value = amp
                    * kernel(-a_coop * (tm.grid.length - zp) * (t - tm.grid.duration))
                    * window;
                omega[(i, 2 * nt + nz + j)] = value; // Xi_I with T_III
                omega[(2 * nt + nz + j, i)] = -value;
                omega[(nt + i, 2 * nt + j)] = value; // Xi_III with T_I
                omega[(2 * nt + j, nt + i)] = -value;
            }
        }
    }
    omega
}

/// Max-norm deviation of `M omega_in M^T` from the target output form,
/// relative to the max-norm of the target.
pub fn symplectic_residual(tm: &TransferMatrix) -> f64 {
    let m = tm.stacked();
    let omega_in = input_commutator_form(tm);
    let omega_out = &m * omega_in * m.transpose();
    let target = target_commutator_form(tm);
    let scale = target.amax();
    (omega_out - target).amax() / scale
}

// ---------------------------------------------------------------------------
// brute-force integrator oracle

/// Input signal for the oracle: either midpoint samples interpreted as a
/// piecewise-constant function on the coarse cells, or an analytic function.
pub enum Signal<'a> {
    Samples(&'a [f64]),
    Function(&'a dyn Fn(f64) -> f64),
}

impl Signal<'_> {
    fn at(&self, x: f64, step: f64, n: usize) -> f64 {
        match self {
            Signal::Samples(s) => {
                let idx = ((x / step) as usize).min(n - 1);
                s[idx]
            }
            Signal::Function(f) => f(x),
        }
    }
}

/// Oracle refinement options: internal sub-steps per coarse cell.  The time
/// factor must be even (output times land on sub-step nodes) and the space
/// factor odd (output points land on sub-cell midpoints).
#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub fine_t: usize,
    pub fine_z: usize,
    /// Re-run at higher resolution and fail if the results drift more than
    /// this relative tolerance.
    pub self_check: Option<f64>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { fine_t: 8, fine_z: 9, self_check: None }
    }
}

/// Integrate the channel's first-order system directly: an RK4 march in time
/// of the spin distribution, with the field reconstructed at each stage from
/// its boundary value plus the midpoint-rule cumulative integral of the spin.
/// Returns the outgoing field at the coarse time midpoints and the final
/// spin at the coarse space midpoints.
pub fn pde_oracle(
    params: &InterfaceParams,
    grid: &Grid,
    channel: Channel,
    field_in: &Signal,
    spin_in: &Signal,
    opts: &OracleOptions,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if opts.fine_t < 2 || opts.fine_t % 2 != 0 {
        return Err(Error::Oracle(format!("fine_t must be even and >= 2, got {}", opts.fine_t)));
    }
    if opts.fine_z % 2 != 1 {
        return Err(Error::Oracle(format!("fine_z must be odd, got {}", opts.fine_z)));
    }

    let (field_out, spin_out) =
        oracle_march(params, grid, channel, field_in, spin_in, opts.fine_t, opts.fine_z);

    if let Some(tol) = opts.self_check {
        let (f2, s2) =
            oracle_march(params, grid, channel, field_in, spin_in, 2 * opts.fine_t, 3 * opts.fine_z);
        let scale = field_out.amax().max(spin_out.amax()).max(1e-300);
        let df = (&field_out - &f2).amax() / scale;
        let ds = (&spin_out - &s2).amax() / scale;
        if df > tol || ds > tol {
            return Err(Error::Oracle(format!(
                "refinement self-check failed: field drift {df:.3e}, spin drift {ds:.3e} > {tol:.3e}"
            )));
        }
    }
    Ok((field_out, spin_out))
}

fn oracle_march(
    params: &InterfaceParams,
    grid: &Grid,
    channel: Channel,
    field_in: &Signal,
    spin_in: &Signal,
    fine_t: usize,
    fine_z: usize,
) -> (DVector<f64>, DVector<f64>) {
    let (sigma_f, sigma_a) = channel.signs();
    let gf = sigma_f * params.field_drive();
    let ga = sigma_a * params.spin_drive();

    let n_zf = grid.n_z * fine_z;
    let dzf = grid.length / n_zf as f64;
    let n_tf = grid.n_t * fine_t;
    let dtf = grid.duration / n_tf as f64;

    // spin state at fine z midpoints
    let mut spin: Vec<f64> = (0..n_zf)
        .map(|m| spin_in.at((m as f64 + 0.5) * dzf, grid.dz(), grid.n_z))
        .collect();

    let mut field_out = DVector::zeros(grid.n_t);

    let deriv = |state: &[f64], f_in: f64, out: &mut [f64]| {
        let mut cum = 0.0;
        for m in 0..state.len() {
            let xi = f_in + gf * (cum + 0.5 * dzf * state[m]);
            out[m] = ga * xi;
            cum += dzf * state[m];
        }
    };

    let mut k1 = vec![0.0; n_zf];
    let mut k2 = vec![0.0; n_zf];
    let mut k3 = vec![0.0; n_zf];
    let mut k4 = vec![0.0; n_zf];
    let mut tmp = vec![0.0; n_zf];

    for step in 0..n_tf {
        // each step lies inside one coarse cell, so a sampled input is
        // constant across all four stages
        let t0 = step as f64 * dtf;
        let f_mid = field_in.at(t0 + 0.5 * dtf, grid.dt(), grid.n_t);
        let (f_a, f_b, f_c) = match field_in {
            Signal::Samples(_) => (f_mid, f_mid, f_mid),
            Signal::Function(f) => (f(t0), f_mid, f(t0 + dtf)),
        };

        deriv(&spin, f_a, &mut k1);
        for m in 0..n_zf {
            tmp[m] = spin[m] + 0.5 * dtf * k1[m];
        }
        deriv(&tmp, f_b, &mut k2);
        for m in 0..n_zf {
            tmp[m] = spin[m] + 0.5 * dtf * k2[m];
        }
        deriv(&tmp, f_b, &mut k3);
        for m in 0..n_zf {
            tmp[m] = spin[m] + dtf * k3[m];
        }
        deriv(&tmp, f_c, &mut k4);
        for m in 0..n_zf {
            spin[m] += dtf / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]);
        }

        // coarse output time t_i = (i + 1/2) dt lands after step i*fine_t + fine_t/2
        let done = step + 1;
        if done % fine_t == fine_t / 2 {
            let i = done / fine_t;
            let total: f64 = spin.iter().sum::<f64>() * dzf;
            field_out[i] =
                field_in.at(done as f64 * dtf, grid.dt(), grid.n_t) + gf * total;
        }
    }

    let mut spin_out = DVector::zeros(grid.n_z);
    for j in 0..grid.n_z {
        spin_out[j] = spin[j * fine_z + (fine_z - 1) / 2];
    }
    (field_out, spin_out)
}

/// Assemble the oracle's linear map in the [`TransferMatrix`] block layout by
/// integrating the responses to every coarse basis cell at once.  Used to
/// certify covariance propagation against the brute-force integrator.
pub fn oracle_transfer(
    params: &InterfaceParams,
    grid: &Grid,
    opts: &OracleOptions,
) -> Result<TransferMatrix> {
    if opts.fine_t < 2 || opts.fine_t % 2 != 0 || opts.fine_z % 2 != 1 {
        return Err(Error::Oracle("oracle_transfer needs even fine_t and odd fine_z".into()));
    }
    let a_coop = params.cooperative_a();
    if a_coop == 0.0 {
        return Err(Error::DegenerateCoupling);
    }
    let branch = if a_coop < 0.0 { Branch::Memory } else { Branch::Entanglement };

    // channel-I signs; channel III follows by negating the cross blocks
    let (sigma_f, sigma_a) = Channel::I.signs();
    let gf = sigma_f * params.field_drive();
    let ga = sigma_a * params.spin_drive();

    let (nt, nz) = (grid.n_t, grid.n_z);
    let n_cols = nt + nz;
    let n_zf = nz * opts.fine_z;
    let dzf = grid.length / n_zf as f64;
    let n_tf = nt * opts.fine_t;
    let dtf = grid.duration / n_tf as f64;

    // column-major response matrix: column c is the spin distribution driven
    // by basis input c (field cells first, then spin cells)
    let mut state = vec![0.0f64; n_zf * n_cols];
    for j in 0..nz {
        let col = nt + j;
        for m in 0..opts.fine_z {
            state[col * n_zf + j * opts.fine_z + m] = 1.0;
        }
    }

    let mut k_ff = DMatrix::zeros(nt, nt);
    let mut k_fa = DMatrix::zeros(nt, nz);
    let mut k_af = DMatrix::zeros(nz, nt);
    let mut k_aa = DMatrix::zeros(nz, nz);

    let mut k1 = vec![0.0f64; n_zf * n_cols];
    let mut k2 = vec![0.0f64; n_zf * n_cols];
    let mut k3 = vec![0.0f64; n_zf * n_cols];
    let mut k4 = vec![0.0f64; n_zf * n_cols];
    let mut tmp = vec![0.0f64; n_zf * n_cols];

    // derivative of all columns; `driven` is the field-basis column whose
    // unit input is on during the current coarse cell
    let deriv = |st: &[f64], driven: usize, out: &mut [f64]| {
        for col in 0..n_cols {
            let s = &st[col * n_zf..(col + 1) * n_zf];
            let o = &mut out[col * n_zf..(col + 1) * n_zf];
            let f_in = if col == driven { 1.0 } else { 0.0 };
            let mut cum = 0.0;
            for m in 0..n_zf {
                let xi = f_in + gf * (cum + 0.5 * dzf * s[m]);
                o[m] = ga * xi;
                cum += dzf * s[m];
            }
        }
    };

    for step in 0..n_tf {
        let driven = step / opts.fine_t;

        deriv(&state, driven, &mut k1);
        for m in 0..state.len() {
            tmp[m] = state[m] + 0.5 * dtf * k1[m];
        }
        deriv(&tmp, driven, &mut k2);
        for m in 0..state.len() {
            tmp[m] = state[m] + 0.5 * dtf * k2[m];
        }
        deriv(&tmp, driven, &mut k3);
        for m in 0..state.len() {
            tmp[m] = state[m] + dtf * k3[m];
        }
        deriv(&tmp, driven, &mut k4);
        for m in 0..state.len() {
            state[m] += dtf / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]);
        }

        let done = step + 1;
        if done % opts.fine_t == opts.fine_t / 2 {
            let i = done / opts.fine_t;
            for col in 0..n_cols {
                let s = &state[col * n_zf..(col + 1) * n_zf];
                let total: f64 = s.iter().sum::<f64>() * dzf;
                let direct = if col == i { 1.0 } else { 0.0 };
                let value = direct + gf * total;
                if col < nt {
                    k_ff[(i, col)] = value;
                } else {
                    k_fa[(i, col - nt)] = value;
                }
            }
        }
    }

    for j in 0..nz {
        let row = j * opts.fine_z + (opts.fine_z - 1) / 2;
        for col in 0..n_cols {
            let value = state[col * n_zf + row];
            if col < nt {
                k_af[(j, col)] = value;
            } else {
                k_aa[(j, col - nt)] = value;
            }
        }
    }

    Ok(TransferMatrix { k_ff, k_fa, k_af, k_aa, branch, grid: *grid, params: *params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::HalfInt;

    fn params_with_atl(atl: f64) -> InterfaceParams {
        InterfaceParams::from_atl(atl, 0.05, 1.0, 0.5, HalfInt::from_int(1), 1.0, 1.0).unwrap()
    }

    fn smooth_input(seed: u64) -> impl Fn(f64) -> f64 {
        // small random Fourier sum, deterministic per seed
        let mut s = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let coefs: Vec<(f64, f64)> = (0..5).map(|_| (next(), next())).collect();
        move |x: f64| {
            coefs
                .iter()
                .enumerate()
                .map(|(k, &(a, b))| {
                    a * (std::f64::consts::PI * k as f64 * x).cos()
                        + b * (std::f64::consts::PI * (k + 1) as f64 * x).sin()
                })
                .sum()
        }
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(1, 4, 1.0, 1.0).is_err());
        assert!(Grid::new(4, 4, 0.0, 1.0).is_err());
        let g = Grid::new(4, 8, 2.0, 1.0).unwrap();
        assert_eq!(g.dt(), 0.5);
        assert_eq!(g.t_mid(0), 0.25);
    }

    #[test]
    fn rotation_roundtrip_and_special_angles() {
        let grid = Grid::new(16, 16, 1.0, 1.0).unwrap();
        let f = smooth_input(3);
        let a = DVector::from_fn(16, |i, _| f(grid.t_mid(i)));
        let b = DVector::from_fn(16, |i, _| f(grid.t_mid(i) + 0.3));

        // out after in restores the input
        let (ra, rb) = rotate_field_frame(FrameDirection::In, 2.7, 1.3, 0.4, &grid, &a, &b);
        let (ba, bb) = rotate_field_frame(FrameDirection::Out, 2.7, 1.3, 0.4, &grid, &ra, &rb);
        assert!((&ba - &a).amax() < 1e-14);
        assert!((&bb - &b).amax() < 1e-14);
        let (ra, rb) = rotate_spin_frame(FrameDirection::In, 2.7, 1.3, 0.4, &grid, &a, &b);
        let (ba, bb) = rotate_spin_frame(FrameDirection::Out, 2.7, 1.3, 0.4, &grid, &ra, &rb);
        assert!((&ba - &a).amax() < 1e-14);
        assert!((&bb - &b).amax() < 1e-14);

        // phi = 0 is the identity
        let (ia, ib) = rotate_field_frame(FrameDirection::In, 0.0, 0.0, 0.0, &grid, &a, &b);
        assert_eq!(ia, a);
        assert_eq!(ib, b);

        // phi = pi/2: field pair maps (a, b) -> (-b, a)
        let (sa, sb) = rotate_field_frame(
            FrameDirection::In,
            std::f64::consts::FRAC_PI_2,
            0.0,
            1.0,
            &grid,
            &a,
            &b,
        );
        assert!((&sa + &b).amax() < 1e-12);
        assert!((&sb - &a).amax() < 1e-12);

        // kappa1 L = 2 pi: input and output bases coincide at z = L
        let kappa1 = 2.0 * std::f64::consts::PI / grid.length;
        let (ca, cb) =
            rotate_field_frame(FrameDirection::In, kappa1, 0.0, grid.length, &grid, &a, &b);
        assert!((&ca - &a).amax() < 1e-12);
        assert!((&cb - &b).amax() < 1e-12);
    }

    #[test]
    fn vanishing_coupling_gives_identity() {
        let grid = Grid::new(32, 32, 1.0, 1.0).unwrap();
        let params = params_with_atl(-1e-8);
        let tm = build_transfer(&params, &grid).unwrap();
        let eye = DMatrix::<f64>::identity(32, 32);
        assert!((&tm.k_ff - &eye).amax() < 1e-6);
        assert!((&tm.k_aa - &eye).amax() < 1e-6);
        assert!(tm.k_fa.amax() < 1e-6 + params.field_drive().abs() * 0.04);
    }

    #[test]
    fn zero_coupling_is_degenerate() {
        let grid = Grid::new(8, 8, 1.0, 1.0).unwrap();
        let mut p = params_with_atl(-1.0);
        p.epsilon = 0.0;
        assert!(matches!(build_transfer(&p, &grid), Err(Error::DegenerateCoupling)));
    }

    #[test]
    fn apply_is_linear_and_zero_maps_to_zero() {
        let grid = Grid::new(24, 20, 1.0, 1.0).unwrap();
        let tm = build_transfer(&params_with_atl(-7.0), &grid).unwrap();
        let mk = |label, n: usize, seed| QuadratureChannel {
            label,
            samples: {
                let f = smooth_input(seed);
                DVector::from_fn(n, |i, _| f(i as f64 / n as f64))
            },
        };
        let f1 = mk(ChannelLabel::XiI, 24, 1);
        let f3 = mk(ChannelLabel::XiIII, 24, 2);
        let a3 = mk(ChannelLabel::TIII, 20, 4);

        let zero_f = QuadratureChannel { label: ChannelLabel::XiI, samples: DVector::zeros(24) };
        let zero_a = QuadratureChannel { label: ChannelLabel::TI, samples: DVector::zeros(20) };
        let ((zf, _), (za, _)) =
            apply_transfer(&tm, (&zero_f, &zero_f), (&zero_a, &zero_a)).unwrap();
        assert_eq!(zf.samples.amax(), 0.0);
        assert_eq!(za.samples.amax(), 0.0);

        // a*x + b*y maps to a*T(x) + b*T(y)
        let (alpha, beta) = (0.7, -1.9);
        let scale = |ch: &QuadratureChannel, s: f64| QuadratureChannel {
            label: ch.label,
            samples: &ch.samples * s,
        };
        let combo = QuadratureChannel {
            label: ChannelLabel::XiI,
            samples: &f1.samples * alpha + &f3.samples * beta,
        };
        let ((out_combo, _), _) =
            apply_transfer(&tm, (&combo, &zero_f), (&zero_a, &zero_a)).unwrap();
        let ((out_x, _), _) =
            apply_transfer(&tm, (&scale(&f1, alpha), &zero_f), (&zero_a, &zero_a)).unwrap();
        let ((out_y, _), _) =
            apply_transfer(&tm, (&scale(&f3, beta), &zero_f), (&zero_a, &zero_a)).unwrap();
        assert!((&out_combo.samples - &out_x.samples - &out_y.samples).amax() < 1e-12);

        // grid mismatch is an error
        let bad = QuadratureChannel { label: ChannelLabel::TI, samples: DVector::zeros(7) };
        assert!(apply_transfer(&tm, (&f1, &f3), (&bad, &a3)).is_err());
    }

    #[test]
    fn cross_block_sign_pattern() {
        // T_I feeds Xi_I with a -2 eps xi2 J0 kernel; T_III feeds Xi_III with +
        let grid = Grid::new(12, 12, 1.0, 1.0).unwrap();
        let params = params_with_atl(-5.0);
        let tm = build_transfer(&params, &grid).unwrap();
        assert!(tm.k_fa[(0, 0)] < 0.0, "channel I cross kernel carries the minus sign");
        let spin =
            QuadratureChannel { label: ChannelLabel::TI, samples: DVector::from_element(12, 1.0) };
        let zero_f = QuadratureChannel { label: ChannelLabel::XiI, samples: DVector::zeros(12) };
        let ((xi_i, xi_iii), _) = apply_transfer(&tm, (&zero_f, &zero_f), (&spin, &spin)).unwrap();
        assert!(xi_i.samples[0] < 0.0);
        assert!(
            (&xi_i.samples + &xi_iii.samples).amax() < 1e-14,
            "channel III flips the cross sign"
        );
        // spin drive: T_I gains from Xi_I with + cbar13 eps fz
        assert!(tm.k_af[(0, 0)] > 0.0);
    }

    #[test]
    fn oracle_perturbative_limit() {
        // constant spin in, zero field in, tiny ATL: field_out ~ -2 eps xi2 L * spin
        let grid = Grid::new(16, 16, 1.0, 1.0).unwrap();
        let params = params_with_atl(-1e-6);
        let spin = vec![1.0; 16];
        let field = vec![0.0; 16];
        let (field_out, _) = pde_oracle(
            &params,
            &grid,
            Channel::I,
            &Signal::Samples(&field),
            &Signal::Samples(&spin),
            &OracleOptions::default(),
        )
        .unwrap();
        let expect = -params.field_drive() * grid.length;
        for i in 0..16 {
            assert!(
                (field_out[i] - expect).abs() < 1e-6 * expect.abs(),
                "perturbative field at {i}: {} vs {expect}",
                field_out[i]
            );
        }
    }

    #[test]
    fn transfer_matches_oracle_on_smooth_inputs() {
        for atl in [-10.0, 10.0] {
            let grid = Grid::new(128, 128, 1.0, 1.0).unwrap();
            let params = params_with_atl(atl);
            let tm = build_transfer(&params, &grid).unwrap();
            let f_fn = smooth_input(11);
            let a_fn = smooth_input(12);
            let f_samples = DVector::from_fn(128, |i, _| f_fn(grid.t_mid(i)));
            let a_samples = DVector::from_fn(128, |j, _| a_fn(grid.z_mid(j)));

            let fch = QuadratureChannel { label: ChannelLabel::XiI, samples: f_samples };
            let ach = QuadratureChannel { label: ChannelLabel::TI, samples: a_samples };
            let ((xi_out, _), (t_out, _)) =
                apply_transfer(&tm, (&fch, &fch), (&ach, &ach)).unwrap();

            let (of, os) = pde_oracle(
                &params,
                &grid,
                Channel::I,
                &Signal::Function(&f_fn),
                &Signal::Function(&a_fn),
                &OracleOptions::default(),
            )
            .unwrap();
            let scale = of.amax().max(os.amax());
            assert!(
                (&xi_out.samples - &of).amax() / scale < 2e-3,
                "field mismatch at ATL={atl}: {}",
                (&xi_out.samples - &of).amax() / scale
            );
            assert!(
                (&t_out.samples - &os).amax() / scale < 2e-3,
                "spin mismatch at ATL={atl}: {}",
                (&t_out.samples - &os).amax() / scale
            );
        }
    }

    #[test]
    fn oracle_transfer_matches_pointwise_oracle() {
        let grid = Grid::new(24, 24, 1.0, 1.0).unwrap();
        let params = params_with_atl(-6.0);
        let opts = OracleOptions { fine_t: 6, fine_z: 5, self_check: None };
        let om = oracle_transfer(&params, &grid, &opts).unwrap();

        // drive with a sampled basis input through the pointwise oracle
        let mut field = vec![0.0; 24];
        field[7] = 1.0;
        let spin = vec![0.0; 24];
        let (of, os) = pde_oracle(
            &params,
            &grid,
            Channel::I,
            &Signal::Samples(&field),
            &Signal::Samples(&spin),
            &opts,
        )
        .unwrap();
        for i in 0..24 {
            assert!((om.k_ff[(i, 7)] - of[i]).abs() < 1e-12);
            assert!((om.k_af[(i, 7)] - os[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_self_check_runs() {
        let grid = Grid::new(16, 16, 1.0, 1.0).unwrap();
        let params = params_with_atl(-4.0);
        let f = smooth_input(5);
        let a = smooth_input(6);
        let opts = OracleOptions { fine_t: 8, fine_z: 9, self_check: Some(1e-4) };
        assert!(pde_oracle(
            &params,
            &grid,
            Channel::III,
            &Signal::Function(&f),
            &Signal::Function(&a),
            &opts
        )
        .is_ok());
    }

    #[test]
    fn symplectic_residual_small_and_shrinking() {
        let params = params_with_atl(-10.0);
        let mut prev = f64::INFINITY;
        for n in [32, 64, 128] {
            let grid = Grid::new(n, n, 1.0, 1.0).unwrap();
            let tm = build_transfer(&params, &grid).unwrap();
            let r = symplectic_residual(&tm);
            assert!(r < prev, "residual should shrink with refinement: {r} vs {prev}");
            prev = r;
        }
        assert!(prev < 5e-3, "residual at n=128: {prev}");
    }

    #[test]
    fn memory_contracts_entanglement_amplifies() {
        let grid = Grid::new(48, 48, 1.0, 1.0).unwrap();
        let mem = build_transfer(&params_with_atl(-12.0), &grid).unwrap();
        let sv_mem = mem.k_ff.clone().singular_values().max();
        assert!(sv_mem <= 1.0 + 5.0 / 48.0, "memory field block must not amplify: {sv_mem}");

        let mut prev = 1.0;
        for atl in [2.0, 6.0, 12.0] {
            let ent = build_transfer(&params_with_atl(atl), &grid).unwrap();
            let sv = ent.k_ff.clone().singular_values().max();
            assert!(sv > prev, "I-Bessel growth must be monotone in ATL: {sv} vs {prev}");
            prev = sv;
        }
    }
}
