use std::f64::consts::PI;

/// Uniform node set `x_j = j h`, `j = 0..=N`, `N = n + 1`, with trig tables
/// built from the distance to the nearer pole so that mirrored nodes carry
/// bitwise-identical values.
#[derive(Debug, Clone)]
pub struct Grid {
    pub n: usize,
    pub h: f64,
    /// `sin(pi x_j)`
    pub f: Vec<f64>,
    /// `cos(pi x_j)`
    pub c: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize) -> Self {
        let big_n = n + 1;
        let h = 1.0 / big_n as f64;
        let mut f = vec![0.0; big_n + 1];
        let mut c = vec![0.0; big_n + 1];
        for j in 0..=big_n {
            let k = j.min(big_n - j);
            let a = PI * k as f64 * h;
            f[j] = if k == 0 { 0.0 } else { a.sin() };
            c[j] = if 2 * j == big_n {
                0.0
            } else if 2 * j < big_n {
                a.cos()
            } else {
                -a.cos()
            };
        }
        Self { n, h, f, c }
    }

    pub fn len(&self) -> usize {
        self.n + 2
    }

    pub fn last(&self) -> usize {
        self.n + 1
    }

    pub fn x(&self, j: usize) -> f64 {
        if j == self.last() {
            1.0
        } else {
            j as f64 * self.h
        }
    }
}

/// Cumulative integral anchored at `x = 1/2` for data that is odd across
/// both poles. Each cell uses the cubic through its four nearest nodes; for
/// an even node count the anchor splits the central cell.
pub fn cumulative_from_center(g: &[f64], h: f64) -> Vec<f64> {
    let big_n = g.len() - 1;
    let at = |i: isize| -> f64 {
        if i < 0 {
            -g[(-i) as usize]
        } else if i > big_n as isize {
            -g[(2 * big_n as isize - i) as usize]
        } else {
            g[i as usize]
        }
    };
    // Integral over [x_j, x_{j+1}].
    let cell = |j: usize| -> f64 {
        let i = j as isize;
        h * (13.0 * (at(i) + at(i + 1)) - (at(i - 1) + at(i + 2))) / 24.0
    };
    let mut out = vec![0.0; g.len()];
    let (lo, hi) = if big_n % 2 == 0 {
        (big_n / 2, big_n / 2)
    } else {
        let (a, b) = (big_n / 2, big_n / 2 + 1);
        let (ia, ib) = (a as isize, b as isize);
        out[a] = -h * (155.0 * at(ia) + 53.0 * at(ib) - 9.0 * at(ia - 1) - 7.0 * at(ib + 1)) / 384.0;
        out[b] = h * (155.0 * at(ib) + 53.0 * at(ia) - 9.0 * at(ib + 1) - 7.0 * at(ia - 1)) / 384.0;
        (a, b)
    };
    for j in hi..big_n {
        out[j + 1] = out[j] + cell(j);
    }
    for j in (1..=lo).rev() {
        out[j - 1] = out[j] - cell(j - 1);
    }
    out
}

/// Trapezoid rule on the uniform grid.
pub fn trapezoid(g: &[f64], h: f64) -> f64 {
    let last = g.len() - 1;
    let inner: f64 = g[1..last].iter().sum();
    h * (inner + 0.5 * (g[0] + g[last]))
}

/// Centred difference with even reflection across both poles.
pub fn diff_even(v: &[f64], h: f64, out: &mut [f64]) {
    let last = v.len() - 1;
    out[0] = 0.0;
    out[last] = 0.0;
    for j in 1..last {
        out[j] = (v[j + 1] - v[j - 1]) / (2.0 * h);
    }
}

/// Fourth-order centred difference with even reflection across both poles.
pub fn diff_even4(v: &[f64], h: f64, out: &mut [f64]) {
    let last = v.len() - 1;
    let at = |i: isize| -> f64 {
        let k = if i < 0 {
            -i
        } else if i > last as isize {
            2 * last as isize - i
        } else {
            i
        };
        v[k as usize]
    };
    out[0] = 0.0;
    out[last] = 0.0;
    for j in 1..last {
        let i = j as isize;
        out[j] = (8.0 * (at(i + 1) - at(i - 1)) - (at(i + 2) - at(i - 2))) / (12.0 * h);
    }
}

/// One pass of the (1, 2, 1)/4 filter with even reflection at the poles.
pub fn smooth_even(v: &mut [f64]) {
    let last = v.len() - 1;
    let old = v.to_vec();
    v[0] = 0.5 * (old[0] + old[1]);
    v[last] = 0.5 * (old[last] + old[last - 1]);
    for j in 1..last {
        v[j] = 0.25 * (old[j - 1] + old[j + 1]) + 0.5 * old[j];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_tables_mirror_exactly() {
        for n in [16, 17, 400, 801] {
            let g = Grid::new(n);
            let last = g.last();
            for j in 0..=last {
                assert_eq!(g.f[j], g.f[last - j]);
                assert_eq!(g.c[j], -g.c[last - j]);
            }
        }
    }

    #[test]
    fn cumulative_is_antisymmetric_and_fourth_order() {
        let exact = 5.0 / (3.0 * PI);
        let mut errs = Vec::new();
        for n in [40, 41, 80, 81] {
            let g = Grid::new(n);
            let vals: Vec<f64> = g.f.iter().map(|s| s * (1.0 + s * s)).collect();
            let c = cumulative_from_center(&vals, g.h);
            let last = g.last();
            for j in 0..=last {
                assert_eq!(c[j], -c[last - j]);
            }
            errs.push((c[last] - exact).abs());
        }
        assert!(errs[0] / errs[2] > 12.0 && errs[1] / errs[3] > 12.0, "{errs:?}");
    }
}
