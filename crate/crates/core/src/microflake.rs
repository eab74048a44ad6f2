//! Phase-function primitives: the SGGX microflake distribution, its projected
//! area, the specular microflake phase function, Henyey-Greenstein and the
//! Schlick reflectance.
//!
//! Directions follow the outward convention: `wi` points from the scattering
//! point towards the light, `wo` towards the viewer. Light therefore
//! propagates along `-wi`.

use crate::error::{Error, Result};
use crate::real::{lit, Real};
use crate::spectrum::Spectrum;
use crate::vec3::{Frame, Vec3};

/// Smallest |cos| used when forming `sigma / cos`.
pub const GRAZING_COS_CLAMP: f64 = 1e-7;

/// Matrices with a smaller determinant are rejected as singular.
pub const DET_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlakeKind {
    /// Flakes whose normals lie around the plane orthogonal to the fiber axis.
    Fiber,
    /// Flakes whose normals cluster around a surface normal.
    Surface,
}

/// Symmetric positive definite matrix defining an SGGX distribution.
///
/// The inverse and `sqrt(det S)` are cached at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SggxMatrix<R> {
    xx: R,
    yy: R,
    zz: R,
    xy: R,
    xz: R,
    yz: R,
    inv: [R; 6],
    sqrt_det: R,
}

impl<R: Real> SggxMatrix<R> {
    /// Builds a matrix from its six unique entries.
    pub fn from_entries(xx: R, yy: R, zz: R, xy: R, xz: R, yz: R) -> Result<Self> {
        // adjugate of the symmetric matrix
        let a_xx = yy * zz - yz * yz;
        let a_yy = xx * zz - xz * xz;
        let a_zz = xx * yy - xy * xy;
        let a_xy = xz * yz - xy * zz;
        let a_xz = xy * yz - xz * yy;
        let a_yz = xy * xz - xx * yz;
        let det = xx * a_xx + xy * a_xy + xz * a_xz;
        if !(det > lit(DET_GUARD)) || xx <= R::zero() || a_zz <= R::zero() {
            return Err(Error::domain(
                "sggx",
                format!("matrix is not positive definite (det = {det})"),
            ));
        }
        let inv = [a_xx, a_yy, a_zz, a_xy, a_xz, a_yz].map(|v| v / det);
        Ok(Self {
            xx,
            yy,
            zz,
            xy,
            xz,
            yz,
            inv,
            sqrt_det: det.sqrt(),
        })
    }

    pub fn diagonal(a: R, b: R, c: R) -> Result<Self> {
        let z = R::zero();
        Self::from_entries(a, b, c, z, z, z)
    }

    pub fn identity() -> Self {
        Self::diagonal(R::one(), R::one(), R::one()).expect("identity is SPD")
    }

    /// Row-major dense form.
    pub fn to_rows(&self) -> [[R; 3]; 3] {
        [
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ]
    }

    pub fn sqrt_det(&self) -> R {
        self.sqrt_det
    }

    /// `w^T S w`
    pub fn quadratic(&self, w: Vec3<R>) -> R {
        quad(
            [self.xx, self.yy, self.zz, self.xy, self.xz, self.yz],
            w,
            w,
        )
    }

    /// `a^T S b`
    pub fn bilinear(&self, a: Vec3<R>, b: Vec3<R>) -> R {
        quad([self.xx, self.yy, self.zz, self.xy, self.xz, self.yz], a, b)
    }

    /// `w^T S^-1 w`
    pub fn inverse_quadratic(&self, w: Vec3<R>) -> R {
        quad(self.inv, w, w)
    }

    /// `M S M^T` for an arbitrary (typically orthogonal) row-major `m`.
    pub fn transformed(&self, m: [[R; 3]; 3]) -> Result<Self> {
        let s = self.to_rows();
        let mut ms = [[R::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    ms[i][j] += m[i][k] * s[k][j];
                }
            }
        }
        let mut out = [[R::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    out[i][j] += ms[i][k] * m[j][k];
                }
            }
        }
        Self::from_entries(
            out[0][0], out[1][1], out[2][2], out[0][1], out[0][2], out[1][2],
        )
    }

    /// Same distribution mirrored through the z = 0 plane.
    pub fn flip_z(&self) -> Self {
        let mut m = *self;
        m.xz = -m.xz;
        m.yz = -m.yz;
        m.inv[4] = -m.inv[4];
        m.inv[5] = -m.inv[5];
        m
    }

    pub fn cast<S: Real>(&self) -> SggxMatrix<S> {
        let c = |v: R| S::from(v).unwrap_or_else(S::nan);
        SggxMatrix {
            xx: c(self.xx),
            yy: c(self.yy),
            zz: c(self.zz),
            xy: c(self.xy),
            xz: c(self.xz),
            yz: c(self.yz),
            inv: self.inv.map(c),
            sqrt_det: c(self.sqrt_det),
        }
    }
}

#[inline]
fn quad<R: Real>(e: [R; 6], a: Vec3<R>, b: Vec3<R>) -> R {
    let [xx, yy, zz, xy, xz, yz] = e;
    a.x * b.x * xx
        + a.y * b.y * yy
        + a.z * b.z * zz
        + (a.x * b.y + a.y * b.x) * xy
        + (a.x * b.z + a.z * b.x) * xz
        + (a.y * b.z + a.z * b.y) * yz
}

/// SGGX matrix for a fiber or surface distribution whose local z axis is
/// rotated onto `orientation`.
///
/// Fiber: `diag(1, 1, a^2)`, surface: `diag(a^2, a^2, 1)`, both expressed in
/// closed form as `c I + (d - c) o o^T`, which needs no explicit rotation.
pub fn sggx_matrix<R: Real>(
    kind: FlakeKind,
    alpha: R,
    orientation: Vec3<R>,
) -> Result<SggxMatrix<R>> {
    if !(alpha > R::zero() && alpha <= R::one()) {
        return Err(Error::domain(
            "roughness",
            format!("must lie in (0, 1], got {alpha}"),
        ));
    }
    let o = orientation
        .try_normalize()
        .ok_or_else(|| Error::domain("orientation", "zero-length or non-finite vector"))?;
    let a2 = alpha * alpha;
    let (iso, axis) = match kind {
        FlakeKind::Fiber => (R::one(), a2),
        FlakeKind::Surface => (a2, R::one()),
    };
    let d = axis - iso;
    SggxMatrix::from_entries(
        iso + d * o.x * o.x,
        iso + d * o.y * o.y,
        iso + d * o.z * o.z,
        d * o.x * o.y,
        d * o.x * o.z,
        d * o.y * o.z,
    )
}

/// Microflake normal distribution `1 / (pi sqrt(det S) q^2)`, `q = w^T S^-1 w`.
pub fn sggx_ndf<R: Real>(s: &SggxMatrix<R>, w: Vec3<R>) -> R {
    let q = s.inverse_quadratic(w);
    R::one() / (R::PI() * s.sqrt_det * q * q)
}

/// Projected area `sigma(w) = sqrt(w^T S w)`.
pub fn projected_area<R: Real>(s: &SggxMatrix<R>, w: Vec3<R>) -> R {
    s.quadratic(w).max(R::zero()).sqrt()
}

/// `sigma(w) / cos(w)`; negative below the horizon.
pub fn lambda_fn<R: Real>(s: &SggxMatrix<R>, w: Vec3<R>) -> Result<R> {
    if w.z == R::zero() {
        return Err(Error::GrazingSingularity);
    }
    Ok(projected_area(s, w) / w.z)
}

/// Cosine with its magnitude clamped away from zero, sign preserved.
#[inline]
pub fn clamp_cos<R: Real>(c: R) -> R {
    let eps = lit::<R>(GRAZING_COS_CLAMP);
    if c.abs() < eps {
        if c < R::zero() {
            -eps
        } else {
            eps
        }
    } else {
        c
    }
}

/// Normalized half vector, `None` when `wi = -wo`.
#[inline]
pub fn half_vector<R: Real>(wi: Vec3<R>, wo: Vec3<R>) -> Option<Vec3<R>> {
    let h = wi + wo;
    let len2 = h.length_squared();
    if len2 <= lit(1e-24) {
        None
    } else {
        Some(h / len2.sqrt())
    }
}

/// Specular microflake phase function `D(h) / (4 sigma(wi))`.
pub fn flake_phase_eval<R: Real>(s: &SggxMatrix<R>, wi: Vec3<R>, wo: Vec3<R>) -> Result<R> {
    let h = half_vector(wi, wo).ok_or(Error::DegenerateHalfVector)?;
    Ok(flake_phase_at(s, wi, h))
}

/// Phase value; for exactly opposite directions the half vector is taken
/// as the average over all normals perpendicular to `wi` (see
/// [`forward_ndf`]).
pub fn flake_phase<R: Real>(s: &SggxMatrix<R>, wi: Vec3<R>, wo: Vec3<R>) -> R {
    match half_vector(wi, wo) {
        Some(h) => flake_phase_at(s, wi, h),
        None => forward_ndf(s, wi) / (lit::<R>(4.0) * projected_area(s, wi)),
    }
}

const FORWARD_RING: usize = 64;

/// Mean of `D(h)` over the great circle of normals perpendicular to `w`:
/// the limit of the half-vector density as `wo` approaches `-w`, averaged
/// over approach directions. Exact for isotropic flakes.
pub fn forward_ndf<R: Real>(s: &SggxMatrix<R>, w: Vec3<R>) -> R {
    let frame = Frame::from_normal(w);
    let step = R::TAU() / lit(FORWARD_RING as f64);
    let mut acc = R::zero();
    for i in 0..FORWARD_RING {
        let (sp, cp) = (step * lit(i as f64 + 0.5)).sin_cos();
        acc += sggx_ndf(s, frame.to_world(Vec3::new(cp, sp, R::zero())));
    }
    acc / lit(FORWARD_RING as f64)
}

#[inline]
fn flake_phase_at<R: Real>(s: &SggxMatrix<R>, wi: Vec3<R>, h: Vec3<R>) -> R {
    sggx_ndf(s, h) / (lit::<R>(4.0) * projected_area(s, wi))
}

/// Henyey-Greenstein density with mean cosine `g`, measured against the
/// propagation direction `-wi`.
pub fn hg_phase_eval<R: Real>(g: R, wi: Vec3<R>, wo: Vec3<R>) -> Result<R> {
    check_hg(g)?;
    Ok(hg_phase(g, -wi.dot(wo)))
}

pub(crate) fn check_hg<R: Real>(g: R) -> Result<()> {
    if !(g.abs() < R::one()) {
        return Err(Error::domain(
            "roughness",
            format!("Henyey-Greenstein g must lie in (-1, 1), got {g}"),
        ));
    }
    Ok(())
}

/// HG density as a function of the scattering cosine.
#[inline]
pub fn hg_phase<R: Real>(g: R, cos_theta: R) -> R {
    let g2 = g * g;
    let denom = (R::one() + g2 - lit::<R>(2.0) * g * cos_theta).max(R::zero());
    (R::one() - g2) / (lit::<R>(4.0) * R::PI() * denom * denom.sqrt())
}

/// Schlick Fresnel `f0 + (1 - f0)(1 - cos)^5`.
pub fn schlick<R: Real>(f0: Spectrum<R>, cos_theta: R) -> Spectrum<R> {
    let m = (R::one() - cos_theta.max(R::zero()).min(R::one())).powi(5);
    f0.map(|f| f + (R::one() - f) * m)
}
