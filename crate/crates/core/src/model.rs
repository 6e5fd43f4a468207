//! State spaces and right-hand sides of the affine cold-plasma hierarchy.
//!
//! For `V = Q x`, `E = R x` and a magnetic field `(0, 0, Bz)` the plasma
//! equations reduce to
//!
//! ```text
//! Q' + Q^2 - Bz L Q + R = 0,   R' - (1 - tr R) Q = 0,   Bz' - tr(L R) = 0,
//! ```
//!
//! with `L` the planar rotation generator `[[0, -1], [1, 0]]`. Everything in
//! this module is a pure function on small value types.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A real 2x2 matrix stored by entry.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat2 {
    pub xx: f64,
    pub xy: f64,
    pub yx: f64,
    pub yy: f64,
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2 { xx: 0.0, xy: 0.0, yx: 0.0, yy: 0.0 };

    pub fn new(xx: f64, xy: f64, yx: f64, yy: f64) -> Self {
        Mat2 { xx, xy, yx, yy }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yx.is_finite() && self.yy.is_finite()
    }
}

/// Full planar affine state: velocity matrix `Q`, field matrix `R` and the
/// magnetic component.
///
/// Vector layout (used by the integrator): `[a, b, c, d, A, B, C, D, Bz]`
/// with `Q = [[a, b], [c, d]]` and `R = [[A, B], [C, D]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlasmaState9 {
    pub velocity: Mat2,
    pub field: Mat2,
    pub magnetic: f64,
}

/// Diagonal electrostatic state `(a, d, A, D)`; layout `[a, d, A, D]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ElectrostaticState4 {
    pub velocity_x: f64,
    pub velocity_y: f64,
    pub field_x: f64,
    pub field_y: f64,
}

/// Axisymmetric electrostatic state `V = a r`, `E = A r`; layout `[a, A]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AxisymState2 {
    pub velocity: f64,
    pub field: f64,
}

/// Radially symmetric state `V = a r + c r_perp`, `E = A r + C r_perp` with
/// `r_perp = (x2, -x1)`; layout `[a, c, A, C, Bz]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RadialState5 {
    pub velocity: f64,
    pub swirl: f64,
    pub field: f64,
    pub field_swirl: f64,
    pub magnetic: f64,
}

impl PlasmaState9 {
    pub const DIM: usize = 9;

    pub fn to_array(&self) -> [f64; 9] {
        let (q, r) = (&self.velocity, &self.field);
        [q.xx, q.xy, q.yx, q.yy, r.xx, r.xy, r.yx, r.yy, self.magnetic]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        PlasmaState9 {
            velocity: Mat2::new(y[0], y[1], y[2], y[3]),
            field: Mat2::new(y[4], y[5], y[6], y[7]),
            magnetic: y[8],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.velocity.is_finite() && self.field.is_finite() && self.magnetic.is_finite()
    }

    /// Electron density `n = 1 - tr R`.
    pub fn density(&self) -> f64 {
        1.0 - self.field.trace()
    }

    /// Finite and of positive density.
    pub fn is_valid(&self) -> bool {
        self.is_finite() && self.density() > 0.0
    }

    /// Drops the off-diagonal and magnetic parts.
    pub fn project_electrostatic(&self) -> ElectrostaticState4 {
        ElectrostaticState4 {
            velocity_x: self.velocity.xx,
            velocity_y: self.velocity.yy,
            field_x: self.field.xx,
            field_y: self.field.yy,
        }
    }

    /// Inverse of [`embed_radial`] on the radial manifold.
    pub fn project_radial(&self) -> RadialState5 {
        RadialState5 {
            velocity: self.velocity.xx,
            swirl: self.velocity.xy,
            field: self.field.xx,
            field_swirl: self.field.xy,
            magnetic: self.magnetic,
        }
    }
}

impl ElectrostaticState4 {
    pub const DIM: usize = 4;

    pub fn new(velocity_x: f64, velocity_y: f64, field_x: f64, field_y: f64) -> Self {
        ElectrostaticState4 { velocity_x, velocity_y, field_x, field_y }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.velocity_x, self.velocity_y, self.field_x, self.field_y]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        ElectrostaticState4::new(y[0], y[1], y[2], y[3])
    }

    pub fn density(&self) -> f64 {
        1.0 - self.field_x - self.field_y
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn is_valid(&self) -> bool {
        self.is_finite() && self.density() > 0.0
    }

    pub fn project_axisym(&self) -> AxisymState2 {
        AxisymState2::new(self.velocity_x, self.field_x)
    }
}

impl AxisymState2 {
    pub const DIM: usize = 2;

    pub fn new(velocity: f64, field: f64) -> Self {
        AxisymState2 { velocity, field }
    }

    pub fn to_array(&self) -> [f64; 2] {
        [self.velocity, self.field]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        AxisymState2::new(y[0], y[1])
    }

    pub fn density(&self) -> f64 {
        1.0 - 2.0 * self.field
    }

    pub fn is_finite(&self) -> bool {
        self.velocity.is_finite() && self.field.is_finite()
    }

    pub fn is_valid(&self) -> bool {
        self.is_finite() && self.density() > 0.0
    }
}

impl RadialState5 {
    pub const DIM: usize = 5;

    pub fn new(velocity: f64, swirl: f64, field: f64, field_swirl: f64, magnetic: f64) -> Self {
        RadialState5 { velocity, swirl, field, field_swirl, magnetic }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.velocity, self.swirl, self.field, self.field_swirl, self.magnetic]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        RadialState5::new(y[0], y[1], y[2], y[3], y[4])
    }

    pub fn density(&self) -> f64 {
        1.0 - 2.0 * self.field
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn is_valid(&self) -> bool {
        self.is_finite() && self.density() > 0.0
    }
}

/// Right-hand side of the full 9-component system.
pub fn rhs_full(s: &PlasmaState9) -> PlasmaState9 {
    let Mat2 { xx: a, xy: b, yx: c, yy: d } = s.velocity;
    let r = s.field;
    let bz = s.magnetic;
    let n = s.density();
    PlasmaState9 {
        velocity: Mat2 {
            xx: -(a * a + b * c) - bz * c - r.xx,
            xy: -b * (a + d) - bz * d - r.xy,
            yx: -c * (a + d) + bz * a - r.yx,
            yy: -(d * d + b * c) + bz * b - r.yy,
        },
        field: Mat2 { xx: n * a, xy: n * b, yx: n * c, yy: n * d },
        magnetic: r.xy - r.yx,
    }
}

/// Right-hand side of the electrostatic system (`Bz = 0`, diagonal `Q`, `R`).
pub fn rhs_electrostatic(s: &ElectrostaticState4) -> ElectrostaticState4 {
    let n = s.density();
    ElectrostaticState4 {
        velocity_x: -s.velocity_x * s.velocity_x - s.field_x,
        velocity_y: -s.velocity_y * s.velocity_y - s.field_y,
        field_x: n * s.velocity_x,
        field_y: n * s.velocity_y,
    }
}

/// Right-hand side of the axisymmetric oscillator `a' = -A - a^2`, `A' = a - 2 A a`.
pub fn rhs_axisym(s: &AxisymState2) -> AxisymState2 {
    let (a, e) = (s.velocity, s.field);
    AxisymState2 { velocity: -e - a * a, field: a - 2.0 * e * a }
}

/// Right-hand side of the radially symmetric system.
pub fn rhs_radial(s: &RadialState5) -> RadialState5 {
    let RadialState5 { velocity: a, swirl: c, field: e, field_swirl: ec, magnetic: bz } = *s;
    let n = 1.0 - 2.0 * e;
    RadialState5 {
        velocity: -a * a + c * c - e + bz * c,
        swirl: -2.0 * c * a - ec - bz * a,
        field: n * a,
        field_swirl: n * c,
        magnetic: 2.0 * ec,
    }
}

/// `Q = [[a, c], [-c, a]]`, `R = [[A, C], [-C, A]]`.
pub fn embed_radial(s: &RadialState5) -> PlasmaState9 {
    PlasmaState9 {
        velocity: Mat2::new(s.velocity, s.swirl, -s.swirl, s.velocity),
        field: Mat2::new(s.field, s.field_swirl, -s.field_swirl, s.field),
        magnetic: s.magnetic,
    }
}

pub fn embed_electrostatic(s: &ElectrostaticState4) -> PlasmaState9 {
    PlasmaState9 {
        velocity: Mat2::new(s.velocity_x, 0.0, 0.0, s.velocity_y),
        field: Mat2::new(s.field_x, 0.0, 0.0, s.field_y),
        magnetic: 0.0,
    }
}

pub fn embed_axisym(s: &AxisymState2) -> ElectrostaticState4 {
    ElectrostaticState4::new(s.velocity, s.velocity, s.field, s.field)
}

pub fn axisym_to_radial(s: &AxisymState2) -> RadialState5 {
    RadialState5::new(s.velocity, 0.0, s.field, 0.0, 0.0)
}

pub fn density(s: &PlasmaState9) -> f64 {
    s.density()
}

/// Linearization spectrum of the equilibrium `Q = R = 0`, `Bz = Bz0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSpectrum {
    pub bz0: f64,
    /// `[+i w1, -i w1, +i w2, -i w2, 0]` with `w1 >= w2`; each nonzero pair
    /// has double multiplicity in the 9-component system.
    pub eigenvalues: Vec<Complex64>,
}

impl EquilibriumSpectrum {
    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re.abs()).fold(0.0, f64::max)
    }

    /// The two oscillation frequencies `w1 >= w2`.
    pub fn frequencies(&self) -> (f64, f64) {
        (self.eigenvalues[0].im, self.eigenvalues[2].im)
    }
}

/// `lambda = ±(1/2) sqrt(-4 - 2 Bz0^2 ± 2 sqrt(Bz0^4 + 4 Bz0^2))` and `0`.
///
/// Both radicands are negative for real `Bz0`, so the eigenvalues are built
/// as purely imaginary numbers. The small radicand is evaluated through the
/// product identity `x_+ x_- = 16` to avoid cancellation at large `|Bz0|`.
pub fn equilibrium_spectrum(bz0: f64) -> EquilibriumSpectrum {
    let b2 = bz0 * bz0;
    let root = (b2 * b2 + 4.0 * b2).sqrt();
    let big = 4.0 + 2.0 * b2 + 2.0 * root;
    let small = 16.0 / big;
    let w1 = 0.5 * big.sqrt();
    let w2 = 0.5 * small.sqrt();
    let i = |w: f64| Complex64::new(0.0, w);
    EquilibriumSpectrum {
        bz0,
        eigenvalues: vec![i(w1), i(-w1), i(w2), i(-w2), Complex64::new(0.0, 0.0)],
    }
}

/// Coefficients of the axisymmetric variational system in the order `(A1, a1)`.
pub fn axisym_variational_matrix(base: &AxisymState2) -> [[f64; 2]; 2] {
    let (a, e) = (base.velocity, base.field);
    [[-2.0 * a, 1.0 - 2.0 * e], [-1.0, -2.0 * a]]
}

/// Coefficients of the electrostatic variational system in the order
/// `(A1, a1, delta1, sigma1)`, where `delta` and `sigma` measure the
/// departure `D - A`, `d - a` from axial symmetry.
pub fn electrostatic_variational_matrix(base: &AxisymState2) -> [[f64; 4]; 4] {
    let (a, e) = (base.velocity, base.field);
    let n = 1.0 - 2.0 * e;
    [
        [-2.0 * a, n, -a, 0.0],
        [-1.0, -2.0 * a, 0.0, 0.0],
        [0.0, 0.0, 0.0, n],
        [0.0, 0.0, -1.0, -2.0 * a],
    ]
}

/// Coefficients of the non-electrostatic radial variational system in the
/// order `(C1, c1, Bz1)`.
pub fn radial_variational_matrix(base: &AxisymState2) -> [[f64; 3]; 3] {
    let (a, e) = (base.velocity, base.field);
    [[0.0, 1.0 - 2.0 * e, 0.0], [-1.0, -2.0 * a, -a], [2.0, 0.0, 0.0]]
}

fn apply<const N: usize>(m: &[[f64; N]; N], v: &[f64; N]) -> [f64; N] {
    let mut out = [0.0; N];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row.iter().zip(v).map(|(x, y)| x * y).sum();
    }
    out
}

pub fn variational_rhs_axisym(base: &AxisymState2, tangent: &[f64; 2]) -> [f64; 2] {
    apply(&axisym_variational_matrix(base), tangent)
}

pub fn variational_rhs_electrostatic(base: &AxisymState2, tangent: &[f64; 4]) -> [f64; 4] {
    apply(&electrostatic_variational_matrix(base), tangent)
}

pub fn variational_rhs_radial(base: &AxisymState2, tangent: &[f64; 3]) -> [f64; 3] {
    apply(&radial_variational_matrix(base), tangent)
}

/// Analytic Jacobian of [`rhs_full`] in the `[a, b, c, d, A, B, C, D, Bz]` layout.
pub fn jacobian_full(s: &PlasmaState9) -> [[f64; 9]; 9] {
    let Mat2 { xx: a, xy: b, yx: c, yy: d } = s.velocity;
    let bz = s.magnetic;
    let n = s.density();
    [
        [-2.0 * a, -c, -b - bz, 0.0, -1.0, 0.0, 0.0, 0.0, -c],
        [-b, -(a + d), 0.0, -b - bz, 0.0, -1.0, 0.0, 0.0, -d],
        [-c + bz, 0.0, -(a + d), -c, 0.0, 0.0, -1.0, 0.0, a],
        [0.0, -c + bz, -b, -2.0 * d, 0.0, 0.0, 0.0, -1.0, b],
        [n, 0.0, 0.0, 0.0, -a, 0.0, 0.0, -a, 0.0],
        [0.0, n, 0.0, 0.0, -b, 0.0, 0.0, -b, 0.0],
        [0.0, 0.0, n, 0.0, -c, 0.0, 0.0, -c, 0.0],
        [0.0, 0.0, 0.0, n, -d, 0.0, 0.0, -d, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0],
    ]
}

/// Nonlinear systems of the hierarchy, usable directly by the integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlasmaSystem {
    Axisym2,
    Electrostatic4,
    Radial5,
    Full9,
}

impl PlasmaSystem {
    pub fn dim(self) -> usize {
        match self {
            PlasmaSystem::Axisym2 => 2,
            PlasmaSystem::Electrostatic4 => 4,
            PlasmaSystem::Radial5 => 5,
            PlasmaSystem::Full9 => 9,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PlasmaSystem::Axisym2 => "axisym2",
            PlasmaSystem::Electrostatic4 => "electrostatic4",
            PlasmaSystem::Radial5 => "radial5",
            PlasmaSystem::Full9 => "full9",
        }
    }

    pub fn component_names(self) -> &'static [&'static str] {
        match self {
            PlasmaSystem::Axisym2 => &["a", "A"],
            PlasmaSystem::Electrostatic4 => &["a", "d", "A", "D"],
            PlasmaSystem::Radial5 => &["a", "c", "A", "C", "Bz"],
            PlasmaSystem::Full9 => &["a", "b", "c", "d", "A", "B", "C", "D", "Bz"],
        }
    }

    /// Density `1 - tr R` of a state vector of this system.
    pub fn density(self, y: &[f64]) -> f64 {
        match self {
            PlasmaSystem::Axisym2 => 1.0 - 2.0 * y[1],
            PlasmaSystem::Electrostatic4 => 1.0 - y[2] - y[3],
            PlasmaSystem::Radial5 => 1.0 - 2.0 * y[2],
            PlasmaSystem::Full9 => 1.0 - y[4] - y[7],
        }
    }

    /// Largest diagonal field entry, the quantity whose approach to 1/2
    /// marks the density boundary for symmetric states.
    pub fn max_field_diagonal(self, y: &[f64]) -> f64 {
        match self {
            PlasmaSystem::Axisym2 => y[1],
            PlasmaSystem::Electrostatic4 => y[2].max(y[3]),
            PlasmaSystem::Radial5 => y[2],
            PlasmaSystem::Full9 => y[4].max(y[7]),
        }
    }
}

impl std::str::FromStr for PlasmaSystem {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "axisym2" => Ok(PlasmaSystem::Axisym2),
            "electrostatic4" => Ok(PlasmaSystem::Electrostatic4),
            "radial5" => Ok(PlasmaSystem::Radial5),
            "full9" => Ok(PlasmaSystem::Full9),
            other => Err(format!(
                "unknown system `{other}` (expected axisym2, electrostatic4, radial5 or full9)"
            )),
        }
    }
}

impl crate::integrator::OdeSystem for PlasmaSystem {
    fn dim(&self) -> usize {
        PlasmaSystem::dim(*self)
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) {
        match self {
            PlasmaSystem::Axisym2 => {
                dydt.copy_from_slice(&rhs_axisym(&AxisymState2::from_slice(y)).to_array())
            }
            PlasmaSystem::Electrostatic4 => dydt.copy_from_slice(
                &rhs_electrostatic(&ElectrostaticState4::from_slice(y)).to_array(),
            ),
            PlasmaSystem::Radial5 => {
                dydt.copy_from_slice(&rhs_radial(&RadialState5::from_slice(y)).to_array())
            }
            PlasmaSystem::Full9 => {
                dydt.copy_from_slice(&rhs_full(&PlasmaState9::from_slice(y)).to_array())
            }
        }
    }

    fn rhs_scaled(&self, t: f64, y: &[f64], scale: f64, dydt: &mut [f64]) {
        if let PlasmaSystem::Axisym2 = self {
            // near the density boundary `(1 - 2A) a` alone can exceed f64::MAX
            let (a, e) = (y[0], y[1]);
            let ga = scale * a;
            dydt[0] = -scale * e - ga * a;
            dydt[1] = ga - 2.0 * e * ga;
        } else {
            self.rhs(t, y, dydt);
            dydt.iter_mut().for_each(|v| *v *= scale);
        }
    }
}
