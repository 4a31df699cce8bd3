//! One-dimensional search helpers.

/// Inverse golden ratio.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone)]
pub struct SectionResult {
    pub x: f64,
    pub value: f64,
    /// Every `(x, f(x))` evaluated, in order.
    pub probes: Vec<(f64, f64)>,
    /// Bracket width after each step, starting with the initial width.
    pub widths: Vec<f64>,
}

/// Golden-section minimization of a unimodal `f` on `[lo, hi]`, stopping
/// when the bracket is at most `tol` wide.
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> SectionResult {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut probes = Vec::new();
    let mut eval = |x: f64, probes: &mut Vec<(f64, f64)>| {
        let v = f(x);
        probes.push((x, v));
        v
    };
    let mut widths = vec![b - a];
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c, &mut probes);
    let mut fd = eval(d, &mut probes);
    while b - a > tol && widths.len() < 400 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c, &mut probes);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d, &mut probes);
        }
        widths.push(b - a);
    }
    let (x, value) = if fc <= fd { (c, fc) } else { (d, fd) };
    SectionResult {
        x,
        value,
        probes,
        widths,
    }
}
