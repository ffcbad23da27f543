//! Gauss–Legendre rules and integration against the Cantor measure.

use std::sync::OnceLock;

const MAX_CACHED: usize = 48;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule, exact for polynomials of degree `≤ 2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a quadrature rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, refined by Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Cached rule for small `n`.
    pub fn cached(n: usize) -> &'static GaussLegendre {
        static RULES: OnceLock<Vec<GaussLegendre>> = OnceLock::new();
        let rules = RULES.get_or_init(|| (1..=MAX_CACHED).map(GaussLegendre::new).collect());
        assert!(
            (1..=MAX_CACHED).contains(&n),
            "cached Gauss-Legendre rules cover 1..={MAX_CACHED} nodes"
        );
        &rules[n - 1]
    }

    /// Number of nodes needed to integrate degree `p` exactly.
    pub fn nodes_for_degree(p: usize) -> usize {
        (p + 2) / 2
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    /// Nodes as offsets from the left end of an interval of length `len`.
    pub fn offsets(&self, len: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * len;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (half * (1.0 + x), half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre integral over `[a, b]`, splitting at the given
/// breakpoints (those inside `(a, b)`) and using `panels` equal panels per
/// piece.
pub fn composite(
    a: f64,
    b: f64,
    breakpoints: &[f64],
    panels: usize,
    rule: &GaussLegendre,
    mut f: impl FnMut(f64) -> f64,
) -> f64 {
    let mut cuts = vec![a];
    cuts.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let h = (w[1] - w[0]) / panels as f64;
        for p in 0..panels {
            let lo = w[0] + h * p as f64;
            let hi = if p + 1 == panels { w[1] } else { lo + h };
            total += rule.integrate(lo, hi, &mut f);
        }
    }
    total
}

/// Moments `∫ x^j dμ` of the Cantor measure for `j = 0..=degree`, from the
/// self-similarity `μ = ½ μ∘S_0^{-1} + ½ μ∘S_1^{-1}`, `S_0 x = x/3`,
/// `S_1 x = (x + 2)/3`.
pub fn cantor_moments(degree: usize) -> Vec<f64> {
    let mut m = vec![0.0; degree + 1];
    m[0] = 1.0;
    for j in 1..=degree {
        let mut acc = 0.0;
        let mut binom = 1.0; // C(j, l)
        for (l, &ml) in m.iter().enumerate().take(j) {
            acc += binom * 2f64.powi((j - l) as i32) * ml;
            binom = binom * (j - l) as f64 / (l + 1) as f64;
        }
        let scale = 3f64.powi(-(j as i32));
        m[j] = 0.5 * scale * acc / (1.0 - scale);
    }
    m
}

/// Interpolatory rule for the Cantor measure on `[0, 1]`, exact for
/// polynomials of degree `< nodes`. Nodes are Chebyshev points.
#[derive(Debug, Clone)]
pub struct CantorRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CantorRule {
    pub fn new(nodes: usize) -> Self {
        let n = nodes.max(1);
        let x: Vec<f64> = (0..n)
            .map(|i| {
                0.5 - 0.5 * (std::f64::consts::PI * (2 * i + 1) as f64 / (2 * n) as f64).cos()
            })
            .collect();
        let moments = cantor_moments(n - 1);
        // Solve V^T w = moments with V[r][j] = x_r^j (Gaussian elimination).
        let mut a: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut row: Vec<f64> = x.iter().map(|&xr| xr.powi(j as i32)).collect();
                row.push(moments[j]);
                row
            })
            .collect();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
                .unwrap();
            a.swap(col, piv);
            for row in 0..n {
                if row != col {
                    let factor = a[row][col] / a[col][col];
                    for c in col..=n {
                        a[row][c] -= factor * a[col][c];
                    }
                }
            }
        }
        let weights = (0..n).map(|i| a[i][n] / a[i][i]).collect();
        Self { nodes: x, weights }
    }
}

/// Cantor function (devil's staircase) via ternary expansion.
pub fn cantor_function(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let mut x = t;
    let mut value = 0.0;
    let mut scale = 0.5;
    for _ in 0..60 {
        x *= 3.0;
        if x >= 2.0 {
            value += scale;
            x -= 2.0;
        } else if x >= 1.0 {
            return value + scale;
        }
        scale *= 0.5;
        if scale < 1e-18 {
            break;
        }
    }
    value
}

/// Integral of a piecewise polynomial (degree `< rule nodes` between
/// consecutive breakpoints) against the Cantor measure restricted to
/// `[lo, hi]`, by recursion over the self-similar cells down to `depth`.
///
/// Cells free of breakpoints and fully inside `[lo, hi]` are integrated
/// exactly. Cells still cut at `depth` apply the cell rule to the pieces
/// anyway, so the result is the integral against the fixed discrete measure
/// that places the rule's nodes in every level-`depth` cell: a linear
/// functional independent of the breakpoints. Its deviation from the Cantor
/// integral is at most `2 ω_1(f, 3^{-depth}) 2^{-depth}` per cut cell.
pub fn cantor_integral(
    f: &mut dyn FnMut(f64) -> f64,
    breakpoints: &[f64],
    lo: f64,
    hi: f64,
    depth: u32,
    rule: &CantorRule,
) -> f64 {
    fn recurse(
        f: &mut dyn FnMut(f64) -> f64,
        breaks: &[f64],
        lo: f64,
        hi: f64,
        a: f64,
        len: f64,
        mass: f64,
        level: u32,
        depth: u32,
        rule: &CantorRule,
    ) -> f64 {
        let b = a + len;
        if b <= lo || a >= hi {
            return 0.0;
        }
        let inside = a >= lo && b <= hi;
        let cut = breaks.iter().any(|&x| x > a && x < b);
        if inside && !cut {
            return mass
                * rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&x, &w)| w * f(a + len * x))
                    .sum::<f64>();
        }
        if level >= depth {
            return mass
                * rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&x, &w)| {
                        let y = a + len * x;
                        if y >= lo && y <= hi {
                            w * f(y)
                        } else {
                            0.0
                        }
                    })
                    .sum::<f64>();
        }
        let third = len / 3.0;
        recurse(f, breaks, lo, hi, a, third, 0.5 * mass, level + 1, depth, rule)
            + recurse(
                f,
                breaks,
                lo,
                hi,
                a + 2.0 * third,
                third,
                0.5 * mass,
                level + 1,
                depth,
                rule,
            )
    }
    recurse(f, breakpoints, lo, hi, 0.0, 1.0, 1.0, 0, depth, rule)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..=12 {
            let rule = GaussLegendre::new(n);
            for p in 0..2 * n {
                let exact = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
                let got = rule.integrate(-1.0, 1.0, |x| x.powi(p as i32));
                assert!((got - exact).abs() < 1e-14, "n={n} p={p} got {got}");
            }
        }
    }

    #[test]
    fn cantor_mean_and_variance() {
        let m = cantor_moments(2);
        assert_eq!(m[0], 1.0);
        assert!((m[1] - 0.5).abs() < 1e-15);
        // variance of the Cantor distribution is 1/8
        assert!((m[2] - 0.25 - 0.125).abs() < 1e-15);
    }

    #[test]
    fn cantor_rule_is_exact() {
        let rule = CantorRule::new(5);
        let m = cantor_moments(4);
        for (j, mj) in m.iter().enumerate() {
            let got: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&x, &w)| w * x.powi(j as i32))
                .sum();
            assert!((got - mj).abs() < 1e-13);
        }
    }

    #[test]
    fn cantor_function_values() {
        assert_eq!(cantor_function(0.5), 0.5);
        assert!((cantor_function(0.25) - 1.0 / 3.0).abs() < 1e-15);
        assert!((cantor_function(0.75) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(cantor_function(1.0 / 9.0 + 1e-9), 0.25);
    }

    #[test]
    fn cantor_integral_of_interval_mass() {
        let rule = CantorRule::new(2);
        let mass = cantor_integral(&mut |_| 1.0, &[], 0.0, 0.4, 20, &rule);
        assert!((mass - 0.5).abs() < 1e-12);
        let mass = cantor_integral(&mut |_| 1.0, &[], 0.2, 0.8, 20, &rule);
        assert!((mass - (cantor_function(0.8) - cantor_function(0.2))).abs() < 1e-6);
    }
}
