//! Symmetric quadrature rules on the reference triangle
//! `{(x, y) : x, y >= 0, x + y <= 1}`.
//!
//! Rules are stored as orbits under the symmetry group of the triangle: the
//! centroid, orbits `(a, a, 1 - 2a)` with three points, and orbits
//! `(a, b, 1 - a - b)` with six points. All weights are positive, all points
//! are strictly inside, and weights sum to the reference area 1/2. The
//! tables were computed offline by solving the moment equations for the
//! given orbit structure and polishing to 40 digits.
//!
//! Degrees above the largest symmetric rule (11 and 12) fall back to a
//! collapsed Gauss-Legendre product rule, which is exact but not symmetric.

use nalgebra::Point2;
use thiserror::Error;

/// Highest exactness degree available.
pub const MAX_DEGREE: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("no quadrature rule of degree {0} (maximum {MAX_DEGREE})")]
pub struct UnsupportedDegree(pub usize);

/// Points on the reference triangle with positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point2<f64>>,
    pub weights: Vec<f64>,
    /// Every polynomial of total degree `<= degree` is integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    /// Points as barycentric triples `(1 - x - y, x, y)`.
    pub fn barycentric(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(|p| [1.0 - p.x - p.y, p.x, p.y]).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

struct OrbitRule {
    degree: usize,
    centroid: Option<f64>,
    s21: &'static [(f64, f64)],
    s111: &'static [(f64, f64, f64)],
}

impl OrbitRule {
    fn expand(&self) -> QuadratureRule {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        if let Some(w) = self.centroid {
            points.push(Point2::new(1.0 / 3.0, 1.0 / 3.0));
            weights.push(w);
        }
        for &(w, a) in self.s21 {
            let b = 1.0 - 2.0 * a;
            for (x, y) in [(a, a), (a, b), (b, a)] {
                points.push(Point2::new(x, y));
                weights.push(w);
            }
        }
        for &(w, a, b) in self.s111 {
            let c = 1.0 - a - b;
            for (x, y) in [(a, b), (b, a), (a, c), (c, a), (b, c), (c, b)] {
                points.push(Point2::new(x, y));
                weights.push(w);
            }
        }
        QuadratureRule {
            points,
            weights,
            degree: self.degree,
        }
    }
}

/// The lowest-degree stored rule that integrates degree `d` exactly.
pub fn quadrature(d: usize) -> Result<QuadratureRule, UnsupportedDegree> {
    if d > MAX_DEGREE {
        return Err(UnsupportedDegree(d));
    }
    Ok(RULES
        .iter()
        .find(|r| r.degree >= d.max(1))
        .map(OrbitRule::expand)
        .unwrap_or_else(|| collapsed_rule(d)))
}

/// Product rule through `(s, t) -> (s, t (1 - s))`; the Jacobian `1 - s`
/// raises the degree in `s` by one.
fn collapsed_rule(d: usize) -> QuadratureRule {
    let (sx, sw) = gauss_legendre((d + 2).div_ceil(2));
    let (tx, tw) = gauss_legendre((d + 1).div_ceil(2));
    let mut points = Vec::with_capacity(sx.len() * tx.len());
    let mut weights = Vec::with_capacity(sx.len() * tx.len());
    for (s, ws) in sx.iter().zip(&sw) {
        for (t, wt) in tx.iter().zip(&tw) {
            points.push(Point2::new(*s, t * (1.0 - s)));
            weights.push(ws * wt * (1.0 - s));
        }
    }
    QuadratureRule { points, weights, degree: d }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // Three-term recurrence for P_n and its derivative.
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

const RULES: &[OrbitRule] = &[
    OrbitRule {
        degree: 1,
        centroid: Some(0.5),
        s21: &[],
        s111: &[],
    },
    OrbitRule {
        degree: 2,
        centroid: None,
        s21: &[(0.16666666666666666, 0.16666666666666666)],
        s111: &[],
    },
    OrbitRule {
        degree: 3,
        centroid: None,
        s21: &[(0.12725018971490143, 0.15663520890203733), (0.03941647695176522, 0.4623987779859007)],
        s111: &[],
    },
    OrbitRule {
        degree: 4,
        centroid: None,
        s21: &[(0.11169079483900574, 0.4459484909159649), (0.054975871827660935, 0.09157621350977074)],
        s111: &[],
    },
    OrbitRule {
        degree: 5,
        centroid: Some(0.1125),
        s21: &[(0.06296959027241357, 0.10128650732345634), (0.0661970763942531, 0.4701420641051151)],
        s111: &[],
    },
    OrbitRule {
        degree: 6,
        centroid: None,
        s21: &[(0.058393137863189684, 0.24928674517091043), (0.02542245318510341, 0.06308901449150223)],
        s111: &[(0.041425537809186785, 0.3103524510337844, 0.6365024991213987)],
    },
    OrbitRule {
        degree: 7,
        centroid: None,
        s21: &[(0.012775981882110621, 0.04250785915056806), (0.07443443257090665, 0.4231003017046778), (0.04542687594360282, 0.14268756006661332)],
        s111: &[(0.017014688135023288, 0.006411633198640972, 0.6819613659381943)],
    },
    OrbitRule {
        degree: 8,
        centroid: Some(0.07215780383889359),
        s21: &[(0.01622924881159904, 0.05054722831703098), (0.05160868526735912, 0.1705693077517602), (0.04754581713364231, 0.4592925882927232)],
        s111: &[(0.013615157087217496, 0.008394777409957605, 0.2631128296346381)],
    },
    OrbitRule {
        degree: 9,
        centroid: Some(0.04856789814139942),
        s21: &[(0.03891377050238714, 0.43708959149293664), (0.039823869463605124, 0.18820353561903272), (0.012788837829349016, 0.04472951339445271), (0.015667350113569536, 0.4896825191987376)],
        s111: &[(0.021641769688644688, 0.2219629891607657, 0.741198598784498)],
    },
    OrbitRule {
        degree: 10,
        centroid: Some(0.04160986849322507),
        s21: &[(0.005475644170134205, 0.028503500288387836), (0.026325974734122296, 0.16291311787409476)],
        s111: &[(0.02813863985540559, 0.516492619327838, 0.33669587527823164), (0.014661432047826118, 0.15330305516956136, 0.8130112461498283), (0.017697473895769197, 0.60732977850085, 0.029307604504579473)],
    },
];
