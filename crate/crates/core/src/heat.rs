//! Heat-trace coefficients of the level-`l` Laplacian.
//!
//! Two routes are provided. [`assemble_canonical`] builds the canonical-form
//! data (`Ē`, `Ω̄`) on the truncated fiber at every quadrature node and
//! [`gilkey`] integrates the standard local formulas. [`a_generic`] and
//! [`a_kahler2d`] evaluate the closed forms in terms of integrated invariants.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::fock::{level_charge, level_rank, CMatrix, FiberAlgebra, FiberOperator, C64, I};
use crate::geometry::{pairwise_sum, GeometryModel, InvariantIntegrals, TorsionTensor};
use crate::rational::{int, rat, Rational};
use crate::unrep::{complex_structure, r_q_matrix};

/// Extra fiber levels kept above `l`: products of two degree-2 operators
/// need four levels of headroom for their level-`l` block to be exact.
pub const CUTOFF_MARGIN: usize = 4;

/// Canonical-form data at one quadrature node, restricted to level `l`.
#[derive(Debug, Clone)]
pub struct HeatSample {
    pub weight: f64,
    pub e_bar: CMatrix,
    /// `Ω̄(e_i,e_j)` at index `i·2n + j`; `None` when the model has torsion.
    pub omega: Option<Vec<CMatrix>>,
    pub rho: f64,
    pub ric_sq: f64,
    pub riem_sq: f64,
}

#[derive(Debug, Clone)]
pub struct HeatData {
    pub n: usize,
    pub l: usize,
    pub rank: usize,
    pub samples: Vec<HeatSample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatCoefficients {
    pub a0: f64,
    pub a2: f64,
    pub a4: Option<f64>,
    /// Largest imaginary part met while integrating fiber traces.
    pub imaginary_part: f64,
}

impl HeatCoefficients {
    pub fn a4(&self) -> Result<f64> {
        self.a4.ok_or_else(|| {
            Error::MissingBundleCurvature(
                "a4 needs the bundle curvature, which is only assembled without torsion".into(),
            )
        })
    }
}

/// Pointwise assembly of `v`, `Ē` and `Ω̄` on a fixed fiber.
pub struct CanonicalAssembler<'a> {
    model: &'a GeometryModel,
    alg: FiberAlgebra,
    l: usize,
    /// `(Je_j)·e_k·` at index `j·2n + k`.
    pairs: Vec<FiberOperator>,
    identity: FiberOperator,
    j_matrix: DMatrix<f64>,
    torsion_free: bool,
}

impl<'a> CanonicalAssembler<'a> {
    pub fn new(model: &'a GeometryModel, l: usize) -> Result<Self> {
        Self::with_cutoff(model, l, l + CUTOFF_MARGIN)
    }

    pub fn with_cutoff(model: &'a GeometryModel, l: usize, cutoff: usize) -> Result<Self> {
        if cutoff < l + CUTOFF_MARGIN {
            return Err(Error::InsufficientCutoff {
                cutoff,
                required: l + CUTOFF_MARGIN,
            });
        }
        let n = model.n();
        let alg = FiberAlgebra::with_cutoff(n, cutoff)?;
        let d = 2 * n;
        let mut pairs = Vec::with_capacity(d * d);
        for j in 0..d {
            let je = alg.j_frame_op(j);
            for k in 0..d {
                pairs.push(&je * alg.frame_op(k));
            }
        }
        let identity = FiberOperator::identity(alg.basis());
        Ok(Self {
            model,
            alg,
            l,
            pairs,
            identity,
            j_matrix: complex_structure(n),
            torsion_free: model.is_torsion_free(),
        })
    }

    pub fn algebra(&self) -> &FiberAlgebra {
        &self.alg
    }

    fn dim(&self) -> usize {
        2 * self.alg.n()
    }

    fn pair(&self, j: usize, k: usize) -> &FiberOperator {
        &self.pairs[j * self.dim() + k]
    }

    fn zero(&self) -> FiberOperator {
        self.pair(0, 0).scale(C64::zero())
    }

    /// Components `v_m` of `v = (i/2) Σ T(e_j,e_k) (Je_j)·e_k· + ½ J𝔗`.
    pub fn potential_of(&self, t: &TorsionTensor) -> Vec<FiberOperator> {
        let d = self.dim();
        let frak = t.trace_vector();
        (0..d)
            .map(|m| {
                let mut acc = self.zero();
                for j in 0..d {
                    for k in 0..d {
                        let c = t.get(j, k, m);
                        if c != 0.0 {
                            acc = &acc + &self.pair(j, k).scale(I * (0.5 * c));
                        }
                    }
                }
                let jt: f64 = (0..d).map(|a| self.j_matrix[(m, a)] * frak[a]).sum();
                if jt != 0.0 {
                    acc = &acc + &self.identity.scale(C64::new(0.5 * jt, 0.0));
                }
                acc
            })
            .collect()
    }

    /// `v` at `x`; identically zero on torsion-free models.
    pub fn potential(&self, x: &[f64]) -> Result<Vec<FiberOperator>> {
        if self.torsion_free {
            return Ok(vec![self.zero(); self.dim()]);
        }
        Ok(self.potential_of(&self.model.torsion_tensor(x)?))
    }

    /// `R^Q(e_i,e_j) = −r_Q(R(e_i,e_j))` for all pairs.
    pub fn spinor_curvature(&self, x: &[f64]) -> Result<Vec<FiberOperator>> {
        let r = self.model.curvature_tensor(x)?;
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                out.push(-&r_q_matrix(&self.alg, &r.endomorphism(i, j))?);
            }
        }
        Ok(out)
    }

    /// Levi-Civita divergence of `v`, with the spinor connection acting on
    /// the fiber index.
    pub fn divergence(&self, x: &[f64], v: &[FiberOperator]) -> Result<FiberOperator> {
        let d = self.dim();
        let t = self.model.torsion_tensor(x)?;
        let frame = self.model.frame(x);
        let mut acc = self.zero();
        for m in 0..d {
            let dir: Vec<f64> = frame.column(m).iter().copied().collect();
            let dt = self.model.torsion_derivative(x, &dir)?;
            acc = &acc + &self.potential_of(&dt)[m];
            let u = self.model.connection_along_frame(x, m);
            for (k, vk) in v.iter().enumerate() {
                let c = u[(m, k)] + t.get(m, k, m);
                if c != 0.0 {
                    acc = &acc - &vk.scale(C64::new(c, 0.0));
                }
            }
            let sigma = -&r_q_matrix(&self.alg, &u)?;
            acc = &acc + &sigma.commutator(&v[m]);
        }
        Ok(acc)
    }

    /// `Ē = −div v − Σ v_m v_m − i Σ (Je_j)·e_k· R^Q(e_j,e_k)` as a full
    /// fiber operator.
    pub fn endomorphism(&self, x: &[f64]) -> Result<FiberOperator> {
        let d = self.dim();
        let v = self.potential(x)?;
        let rq = self.spinor_curvature(x)?;
        let mut acc = if self.torsion_free {
            self.zero()
        } else {
            -&self.divergence(x, &v)?
        };
        for vm in &v {
            acc = &acc - &(vm * vm);
        }
        for j in 0..d {
            for k in 0..d {
                acc = &acc - &(self.pair(j, k) * &rq[j * d + k]).scale(I);
            }
        }
        Ok(acc)
    }

    pub fn sample(&self, x: &[f64], weight: f64) -> Result<HeatSample> {
        let e_bar = self.endomorphism(x)?.level_block(self.l)?;
        let omega = if self.torsion_free {
            Some(
                self.spinor_curvature(x)?
                    .iter()
                    .map(|op| op.level_block(self.l))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        let lc = self.model.lc_scalars(x);
        Ok(HeatSample {
            weight,
            e_bar,
            omega,
            rho: lc.rho,
            ric_sq: lc.ric_sq,
            riem_sq: lc.riem_sq,
        })
    }
}

/// Canonical-form data of the level-`l` Laplacian at every quadrature node.
pub fn assemble_canonical(model: &GeometryModel, l: usize) -> Result<HeatData> {
    let asm = CanonicalAssembler::new(model, l)?;
    let samples = model
        .points()
        .iter()
        .map(|p| asm.sample(&p.coords, p.weight))
        .collect::<Result<Vec<_>>>()?;
    Ok(HeatData {
        n: model.n(),
        l,
        rank: level_rank(model.n(), l),
        samples,
    })
}

/// Local heat invariants integrated over the samples.
pub fn gilkey(data: &HeatData) -> Result<HeatCoefficients> {
    if data.samples.is_empty() {
        return Err(Error::InvalidArgument("heat data without samples".into()));
    }
    let norm = (4.0 * PI).powi(-(data.n as i32));
    let rank = data.rank as f64;
    let mut imag = 0.0_f64;
    let mut vol = Vec::new();
    let mut a2 = Vec::new();
    let mut a4 = Vec::new();
    let mut have_omega = true;
    for s in &data.samples {
        let dim = s.e_bar.nrows();
        if dim != data.rank {
            return Err(Error::DimensionMismatch(format!(
                "level block of size {dim}, expected rank {}",
                data.rank
            )));
        }
        let tr_e = s.e_bar.trace();
        let tr_e2 = (&s.e_bar * &s.e_bar).trace();
        imag = imag.max(tr_e.im.abs()).max(tr_e2.im.abs());
        vol.push(s.weight * rank);
        a2.push(s.weight * (6.0 * tr_e.re + rank * s.rho) / 6.0);
        let mut local = 60.0 * s.rho * tr_e.re
            + 180.0 * tr_e2.re
            + rank * (5.0 * s.rho * s.rho - 2.0 * s.ric_sq + 2.0 * s.riem_sq);
        match &s.omega {
            Some(om) => {
                let mut sq = C64::zero();
                for w in om {
                    sq += (w * w).trace();
                }
                imag = imag.max(sq.im.abs());
                local += 30.0 * sq.re;
            }
            None => have_omega = false,
        }
        a4.push(s.weight * local / 360.0);
    }
    Ok(HeatCoefficients {
        a0: norm * pairwise_sum(&vol),
        a2: norm * pairwise_sum(&a2),
        a4: have_omega.then(|| norm * pairwise_sum(&a4)),
        imaginary_part: imag,
    })
}

/// `l(l+n) / (n(n+1))`.
pub fn alpha(n: usize, l: usize) -> f64 {
    (l * (l + n)) as f64 / (n * (n + 1)) as f64
}

/// Closed-form `(a0, a2)` for any dimension, torsion included.
pub fn a_generic(n: usize, l: usize, ints: &InvariantIntegrals) -> (f64, f64) {
    let norm = (4.0 * PI).powi(-(n as i32));
    let rank = level_rank(n, l) as f64;
    let al = alpha(n, l);
    let q2 = level_charge(n, l).powi(2);
    let nf = n as f64;
    let integrand = (1.0 / 6.0 + al / 2.0) * ints.rho
        + (al - 2.0 * q2 / (nf * nf)) * ints.kahler_curvature
        + al * (0.25 * ints.torsion_cubic + 0.375 * ints.torsion_sq)
        + (-0.25 + q2 / (nf * nf) - al / (2.0 * nf)) * ints.torsion_trace_sq
        - 0.5 * al * ints.tau_sq;
    (norm * rank * ints.volume, norm * rank * integrand)
}

/// Two-dimensional torsion-free closed forms `(a0, a2, a4)`.
pub fn a_kahler2d(l: usize, ints: &InvariantIntegrals) -> Result<(f64, f64, f64)> {
    let scale = ints.volume.abs().max(1.0);
    if !ints.torsion_free(1e-12 * scale) {
        return Err(Error::UnsupportedModel(
            "two-dimensional closed forms need a torsion-free model".into(),
        ));
    }
    let q2 = level_charge(1, l).powi(2);
    Ok((
        ints.volume / (4.0 * PI),
        (1.0 + 6.0 * q2) * ints.rho / (24.0 * PI),
        (2.0 + 15.0 * q2 + 60.0 * q2 * q2) * ints.rho_sq / (480.0 * PI),
    ))
}

/// Exact version of [`a_kahler2d`]. The inputs `vol`, `∫ρ`, `∫ρ²` are given
/// as rational multiples of `π`, which cancels from the result.
pub fn a_kahler2d_exact(l: usize, vol: &Rational, rho: &Rational, rho_sq: &Rational) -> [Rational; 3] {
    let q = -(int(l as i64) + rat(1, 2));
    let q2 = &q * &q;
    let one = Rational::one();
    [
        vol / int(4),
        (one + int(6) * &q2) * rho / int(24),
        (int(2) + int(15) * &q2 + int(60) * &q2 * &q2) * rho_sq / int(480),
    ]
}
