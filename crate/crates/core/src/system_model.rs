//! Synthetic multi-cell instance generation.
//!
//! Everything here is a deterministic function of a configuration and a
//! 64-bit seed. Sequences, device positions, activity, and channel/noise
//! realizations draw from independent substreams of the seed, so changing
//! the antenna count re-draws channels without perturbing the instance.

use crate::rng::{stream, substream};
use crate::{CoreError, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub mod snapshot;

const SQRT3: f64 = 1.732_050_807_568_877_2;
/// Rejection attempts per device before giving up.
const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;

/// Cell geometry family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutKind {
    /// Hexagonal cells on the lattice with x-coordinates at multiples of
    /// 3R/2 and y-coordinates at (half-)integer multiples of sqrt(3)R.
    Hex,
    /// Square cells of side 2R on a uniform grid with spacing 2R.
    Square,
}

impl std::str::FromStr for LayoutKind {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hex" | "hexagonal" => Ok(LayoutKind::Hex),
            "square" | "grid" => Ok(LayoutKind::Square),
            other => Err(CoreError::InvalidParameter(format!(
                "unsupported layout kind '{other}'"
            ))),
        }
    }
}

/// Base station layout: `bs_positions[b]` is the planar position of the
/// base station of cell `b`, in meters.
#[derive(Debug, Clone)]
pub struct CellLayout {
    pub kind: LayoutKind,
    pub radius_m: f64,
    pub bs_positions: Vec<[f64; 2]>,
}

impl CellLayout {
    pub fn cells(&self) -> usize {
        self.bs_positions.len()
    }

    /// True if `p` lies inside the cell polygon of cell `b`.
    pub fn contains(&self, b: usize, p: [f64; 2]) -> bool {
        let c = self.bs_positions[b];
        let (dx, dy) = ((p[0] - c[0]).abs(), (p[1] - c[1]).abs());
        let r = self.radius_m;
        match self.kind {
            // Hexagon with vertices at distance R on the x-axis and flat
            // edges at y = +- sqrt(3)R/2.
            LayoutKind::Hex => dy <= SQRT3 / 2.0 * r + 1e-9 && SQRT3 * dx + dy <= SQRT3 * r + 1e-9,
            LayoutKind::Square => dx <= r + 1e-9 && dy <= r + 1e-9,
        }
    }
}

/// Signature sequence family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceType {
    /// Unit-modulus entries drawn uniformly from {±√2/2 ± i·√2/2}; every
    /// column has squared norm exactly L.
    Qpsk,
    /// Columns uniform on the complex sphere of radius √L (Gaussian draw,
    /// rescaled to norm √L).
    Sphere,
    /// I.i.d. standard complex Gaussian entries, no normalization.
    Gaussian,
}

impl std::str::FromStr for SequenceType {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" | "i" => Ok(SequenceType::Qpsk),
            "sphere" | "ii" => Ok(SequenceType::Sphere),
            "gaussian" | "iii" => Ok(SequenceType::Gaussian),
            other => Err(CoreError::InvalidParameter(format!(
                "unsupported sequence type '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for SequenceType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SequenceType::Qpsk => write!(f, "qpsk"),
            SequenceType::Sphere => write!(f, "sphere"),
            SequenceType::Gaussian => write!(f, "gaussian"),
        }
    }
}

/// Everything needed to generate one instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceConfig {
    pub layout_kind: LayoutKind,
    pub cells: usize,
    pub radius_m: f64,
    /// Devices per cell. A single entry is broadcast to all cells.
    pub n_per_cell: Vec<usize>,
    /// Active devices per cell. A single entry is broadcast to all cells.
    pub k_per_cell: Vec<usize>,
    pub sequence_length: usize,
    pub seq_type: SequenceType,
    /// Noise variance normalized by the transmit power.
    pub sigma2: f64,
    /// Minimum device-to-own-BS distance in meters.
    pub min_dist_m: f64,
    pub seed: u64,
}

impl InstanceConfig {
    /// Homogeneous configuration with the library defaults (hex layout,
    /// 500 m radius, 10 m minimum distance, link budget from
    /// [`default_noise_variance`]).
    pub fn homogeneous(
        b: usize,
        n: usize,
        k: usize,
        l: usize,
        seq_type: SequenceType,
        seed: u64,
    ) -> Self {
        InstanceConfig {
            layout_kind: LayoutKind::Hex,
            cells: b,
            radius_m: 500.0,
            n_per_cell: vec![n],
            k_per_cell: vec![k],
            sequence_length: l,
            seq_type,
            sigma2: default_noise_variance(),
            min_dist_m: 10.0,
            seed,
        }
    }

    fn expanded(&self) -> Result<(Vec<usize>, Vec<usize>)> {
        let expand = |v: &Vec<usize>, what: &str| -> Result<Vec<usize>> {
            if v.len() == 1 {
                Ok(vec![v[0]; self.cells])
            } else if v.len() == self.cells {
                Ok(v.clone())
            } else {
                Err(CoreError::InvalidParameter(format!(
                    "{what} must have 1 or {} entries, got {}",
                    self.cells,
                    v.len()
                )))
            }
        };
        let n = expand(&self.n_per_cell, "n_per_cell")?;
        let k = expand(&self.k_per_cell, "k_per_cell")?;
        for (b, (&nb, &kb)) in n.iter().zip(&k).enumerate() {
            if kb > nb {
                return Err(CoreError::InvalidParameter(format!(
                    "cell {b}: K={kb} exceeds N={nb}"
                )));
            }
        }
        Ok((n, k))
    }
}

/// One generated world: geometry, sequences, fading, truth.
#[derive(Debug, Clone)]
pub struct SystemInstance {
    pub layout: CellLayout,
    pub n_per_cell: Vec<usize>,
    pub k_per_cell: Vec<usize>,
    /// Planar device positions in meters, cell blocks concatenated.
    pub device_positions: Vec<[f64; 2]>,
    /// Signature matrix, L x (total devices).
    pub s: DMatrix<Complex64>,
    pub seq_type: SequenceType,
    /// `gains[b][i]`: linear large-scale gain from device `i` to BS `b`.
    pub gains: Vec<DVector<f64>>,
    pub sigma2: f64,
    /// Binary activity truth, length = total devices.
    pub a_true: DVector<f64>,
    pub seed: u64,
}

impl SystemInstance {
    pub fn generate(cfg: &InstanceConfig) -> Result<Self> {
        if cfg.sigma2 <= 0.0 {
            return Err(CoreError::InvalidParameter("sigma2 must be positive".into()));
        }
        if cfg.sequence_length < 2 {
            return Err(CoreError::InvalidParameter(
                "sequence length must be at least 2".into(),
            ));
        }
        let (n_per_cell, k_per_cell) = cfg.expanded()?;
        let layout = build_cell_layout(cfg.layout_kind, cfg.cells, cfg.radius_m)?;
        let total: usize = n_per_cell.iter().sum();

        let mut seq_rng = substream(cfg.seed, stream::SEQUENCES);
        let s = generate_sequences(cfg.seq_type, cfg.sequence_length, total, &mut seq_rng);

        let mut pos_rng = substream(cfg.seed, stream::POSITIONS);
        let device_positions = place_devices(&layout, &n_per_cell, cfg.min_dist_m, &mut pos_rng)?;

        let gains = compute_fading(&layout, &device_positions, &n_per_cell)?;

        let mut act_rng = substream(cfg.seed, stream::ACTIVITY);
        let a_true = sample_activity(&n_per_cell, &k_per_cell, &mut act_rng)?;

        Ok(SystemInstance {
            layout,
            n_per_cell,
            k_per_cell,
            device_positions,
            s,
            seq_type: cfg.seq_type,
            gains,
            sigma2: cfg.sigma2,
            a_true,
            seed: cfg.seed,
        })
    }

    pub fn cells(&self) -> usize {
        self.layout.cells()
    }

    pub fn total_devices(&self) -> usize {
        self.a_true.len()
    }

    pub fn sequence_length(&self) -> usize {
        self.s.nrows()
    }

    /// Flat-index offset of cell `b`'s device block.
    pub fn cell_offset(&self, b: usize) -> usize {
        self.n_per_cell[..b].iter().sum()
    }

    /// Cell that owns flat device index `i`.
    pub fn cell_of(&self, i: usize) -> usize {
        let mut acc = 0;
        for (b, &nb) in self.n_per_cell.iter().enumerate() {
            acc += nb;
            if i < acc {
                return b;
            }
        }
        panic!("device index {i} out of range");
    }

    /// Channel/noise RNG for one covariance realization of this instance.
    pub fn channel_rng(&self) -> ChaCha8Rng {
        substream(self.seed, stream::CHANNELS)
    }
}

/// The observations the solvers see: `mats[b]` is the Hermitian sample
/// covariance at BS `b`, formed from `m` antennas.
#[derive(Debug, Clone)]
pub struct SampleCovariances {
    pub mats: Vec<DMatrix<Complex64>>,
    pub m: usize,
}

/// Lays out `b` base stations of radius `radius_m` cells.
///
/// Hex layouts fill the lattice ring by ring around the origin (complete
/// rings give B in 1, 7, 19, 37, ...); square layouts require a perfect
/// square and use grid spacing 2R with the grid centered on the origin.
pub fn build_cell_layout(kind: LayoutKind, b: usize, radius_m: f64) -> Result<CellLayout> {
    if b == 0 {
        return Err(CoreError::InvalidParameter("cell count must be positive".into()));
    }
    if radius_m <= 0.0 {
        return Err(CoreError::InvalidParameter("cell radius must be positive".into()));
    }
    let bs_positions = match kind {
        LayoutKind::Hex => hex_positions(b, radius_m),
        LayoutKind::Square => {
            let g = (b as f64).sqrt().round() as usize;
            if g * g != b {
                return Err(CoreError::InvalidParameter(format!(
                    "square layout needs a perfect-square cell count, got {b}"
                )));
            }
            let c = (g as f64 - 1.0) / 2.0;
            let mut pos = Vec::with_capacity(b);
            for j in 0..g {
                for i in 0..g {
                    pos.push([
                        2.0 * radius_m * (i as f64 - c),
                        2.0 * radius_m * (j as f64 - c),
                    ]);
                }
            }
            pos
        }
    };
    Ok(CellLayout {
        kind,
        radius_m,
        bs_positions,
    })
}

/// BS position for lattice indices (k, l): x = 3Rk/2, and y an integer
/// (even k) or half-odd-integer (odd k) multiple of sqrt(3)R.
fn hex_lattice_point(k: i64, l: i64, r: f64) -> [f64; 2] {
    let half = if k.rem_euclid(2) == 1 { 0.5 } else { 0.0 };
    [1.5 * r * k as f64, SQRT3 * r * (l as f64 + half)]
}

fn hex_positions(b: usize, r: f64) -> Vec<[f64; 2]> {
    // Enumerate lattice points by hex ring, then by angle within the ring.
    let ring_of = |k: i64, l: i64| -> i64 {
        let q = k;
        let rr = l - k.div_euclid(2);
        (q.abs() + rr.abs() + (q + rr).abs()) / 2
    };
    let max_ring = {
        // Smallest ring count that covers b cells: 1 + 3r(r+1) >= b.
        let mut rings = 0i64;
        while 1 + 3 * rings * (rings + 1) < b as i64 {
            rings += 1;
        }
        rings
    };
    let mut points: Vec<(i64, f64, [f64; 2])> = Vec::new();
    let span = 2 * max_ring + 2;
    for k in -span..=span {
        for l in -span..=span {
            let ring = ring_of(k, l);
            if ring <= max_ring {
                let p = hex_lattice_point(k, l, r);
                let angle = if ring == 0 { 0.0 } else { p[1].atan2(p[0]) };
                let angle = if angle < -1e-12 {
                    angle + 2.0 * std::f64::consts::PI
                } else {
                    angle
                };
                points.push((ring, angle, p));
            }
        }
    }
    points.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
    });
    points.into_iter().take(b).map(|(_, _, p)| p).collect()
}

/// Linear path-loss gain for `distance_km`, from 128.1 + 37.6 log10(d) dB.
pub fn path_loss_gain(distance_km: f64) -> Result<f64> {
    if distance_km <= 0.0 {
        return Err(CoreError::InvalidParameter(format!(
            "path loss needs a positive distance, got {distance_km} km"
        )));
    }
    let pl_db = 128.1 + 37.6 * distance_km.log10();
    Ok(10f64.powf(-pl_db / 10.0))
}

/// Noise variance normalized by the transmit power, from a link budget.
pub fn noise_variance_from_budget(
    tx_dbm: f64,
    noise_dbm_per_hz: f64,
    bandwidth_hz: f64,
) -> Result<f64> {
    if bandwidth_hz <= 0.0 {
        return Err(CoreError::InvalidParameter(
            "bandwidth must be positive".into(),
        ));
    }
    let noise_dbm = noise_dbm_per_hz + 10.0 * bandwidth_hz.log10();
    Ok(10f64.powf((noise_dbm - tx_dbm) / 10.0))
}

/// The default link budget: 23 dBm transmit power, -169 dBm/Hz noise over
/// 10 MHz.
pub fn default_noise_variance() -> f64 {
    noise_variance_from_budget(23.0, -169.0, 1e7).expect("static budget")
}

/// Places devices uniformly in their own cell polygon, rejecting points
/// closer than `min_dist_m` to the serving base station.
pub fn place_devices(
    layout: &CellLayout,
    n_per_cell: &[usize],
    min_dist_m: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<[f64; 2]>> {
    if min_dist_m < 0.0 || min_dist_m >= layout.radius_m {
        return Err(CoreError::InvalidParameter(format!(
            "min_dist_m must lie in [0, R); got {min_dist_m}"
        )));
    }
    let r = layout.radius_m;
    let mut out = Vec::with_capacity(n_per_cell.iter().sum());
    for (b, &nb) in n_per_cell.iter().enumerate() {
        let c = layout.bs_positions[b];
        // Bounding box of the cell polygon.
        let (hx, hy) = match layout.kind {
            LayoutKind::Hex => (r, SQRT3 / 2.0 * r),
            LayoutKind::Square => (r, r),
        };
        for _ in 0..nb {
            let mut placed = false;
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                let p = [
                    c[0] + rng.random_range(-hx..=hx),
                    c[1] + rng.random_range(-hy..=hy),
                ];
                let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
                if layout.contains(b, p) && d2 >= min_dist_m * min_dist_m {
                    out.push(p);
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(CoreError::PlacementFailed {
                    attempts: MAX_PLACEMENT_ATTEMPTS,
                    min_dist_m,
                });
            }
        }
    }
    Ok(out)
}

/// Signature matrix with `cols` columns of length `l`.
pub fn generate_sequences(
    seq_type: SequenceType,
    l: usize,
    cols: usize,
    rng: &mut ChaCha8Rng,
) -> DMatrix<Complex64> {
    let half_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut s = DMatrix::<Complex64>::zeros(l, cols);
    for j in 0..cols {
        match seq_type {
            SequenceType::Qpsk => {
                for i in 0..l {
                    let re = if rng.random::<bool>() { half_sqrt2 } else { -half_sqrt2 };
                    let im = if rng.random::<bool>() { half_sqrt2 } else { -half_sqrt2 };
                    s[(i, j)] = Complex64::new(re, im);
                }
            }
            SequenceType::Sphere => {
                let mut norm2 = 0.0;
                for i in 0..l {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    norm2 += re * re + im * im;
                    s[(i, j)] = Complex64::new(re, im);
                }
                let scale = (l as f64 / norm2).sqrt();
                for i in 0..l {
                    s[(i, j)] *= scale;
                }
            }
            SequenceType::Gaussian => {
                for i in 0..l {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    s[(i, j)] = Complex64::new(re * half_sqrt2, im * half_sqrt2);
                }
            }
        }
    }
    s
}

/// Large-scale gains from every device to every BS.
pub fn compute_fading(
    layout: &CellLayout,
    device_positions: &[[f64; 2]],
    n_per_cell: &[usize],
) -> Result<Vec<DVector<f64>>> {
    let total: usize = n_per_cell.iter().sum();
    assert_eq!(device_positions.len(), total);
    let mut gains = Vec::with_capacity(layout.cells());
    for b in 0..layout.cells() {
        let c = layout.bs_positions[b];
        let mut g = DVector::<f64>::zeros(total);
        for (i, p) in device_positions.iter().enumerate() {
            let d_m = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt();
            if d_m == 0.0 {
                return Err(CoreError::InvalidParameter(format!(
                    "device {i} coincides with BS {b}"
                )));
            }
            g[i] = path_loss_gain(d_m / 1000.0)?;
        }
        gains.push(g);
    }
    Ok(gains)
}

/// Binary activity vector with exactly `k_per_cell[b]` ones uniformly
/// placed (without replacement) inside each cell block.
pub fn sample_activity(
    n_per_cell: &[usize],
    k_per_cell: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<DVector<f64>> {
    let total: usize = n_per_cell.iter().sum();
    let mut a = DVector::<f64>::zeros(total);
    let mut offset = 0;
    for (&nb, &kb) in n_per_cell.iter().zip(k_per_cell) {
        if kb > nb {
            return Err(CoreError::InvalidParameter(format!(
                "K={kb} exceeds N={nb}"
            )));
        }
        // Partial Fisher-Yates: the first kb entries of the shuffle.
        let mut idx: Vec<usize> = (0..nb).collect();
        for i in 0..kb {
            let j = rng.random_range(i..nb);
            idx.swap(i, j);
            a[offset + idx[i]] = 1.0;
        }
        offset += nb;
    }
    Ok(a)
}

/// Simulates one pilot stage with `m` antennas and returns the per-BS
/// sample covariances. Only active devices contribute.
pub fn simulate_received(
    inst: &SystemInstance,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SampleCovariances> {
    if m == 0 {
        return Err(CoreError::InvalidParameter("antenna count must be positive".into()));
    }
    let l = inst.sequence_length();
    let total = inst.total_devices();
    let half_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut mats = Vec::with_capacity(inst.cells());
    for b in 0..inst.cells() {
        let mut y = DMatrix::<Complex64>::zeros(l, m);
        let gains = &inst.gains[b];
        for i in 0..total {
            if inst.a_true[i] == 0.0 {
                continue;
            }
            let amp = gains[i].sqrt();
            let s_col = inst.s.column(i);
            for ant in 0..m {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                let h = Complex64::new(re * half_sqrt2, im * half_sqrt2) * amp;
                for row in 0..l {
                    y[(row, ant)] += s_col[row] * h;
                }
            }
        }
        let noise_amp = inst.sigma2.sqrt() * half_sqrt2;
        for ant in 0..m {
            for row in 0..l {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                y[(row, ant)] += Complex64::new(re * noise_amp, im * noise_amp);
            }
        }
        let mut cov = &y * y.adjoint();
        cov /= Complex64::new(m as f64, 0.0);
        // Exact Hermitian symmetry, independent of gemm rounding order.
        let herm = (&cov + cov.adjoint()) * Complex64::new(0.5, 0.0);
        mats.push(herm);
    }
    Ok(SampleCovariances { mats, m })
}

/// The model covariance S G_b diag(a) S^H + sigma2 I for one cell.
pub fn model_covariance(
    s: &DMatrix<Complex64>,
    gains_b: &DVector<f64>,
    a: &DVector<f64>,
    sigma2: f64,
) -> DMatrix<Complex64> {
    let l = s.nrows();
    // T = S * diag(sqrt(a .* g)); then Sigma = T T^H + sigma2 I.
    let mut t = s.clone();
    for (j, mut col) in t.column_iter_mut().enumerate() {
        let w = (a[j].max(0.0) * gains_b[j]).sqrt();
        col *= Complex64::new(w, 0.0);
    }
    let mut cov = &t * t.adjoint();
    for i in 0..l {
        cov[(i, i)] += Complex64::new(sigma2, 0.0);
    }
    cov
}
