//! Gauss-Legendre rules on [-1, 1] and the 15-point Kronrod pair.
//!
//! Small rules are generated once by Newton iteration on the Legendre
//! recurrence and cached; the embedded 7/15 pair uses the standard
//! tabulated nodes.

use std::sync::OnceLock;

use num_complex::Complex64;

/// Nodes and weights of a quadrature rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Legendre P_n(x) and its derivative via the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre rule of order `n` by Newton refinement of the
/// Chebyshev-like initial guesses.
pub fn legendre_rule(n: usize) -> GaussRule {
    assert!(n >= 1, "rule order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_pair(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        nodes[k] = x;
        weights[k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // Newton converges from alternating ends; sort ascending for stability.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| nodes[a].total_cmp(&nodes[b]));
    GaussRule {
        nodes: idx.iter().map(|&i| nodes[i]).collect(),
        weights: idx.iter().map(|&i| weights[i]).collect(),
    }
}

static RULE4: OnceLock<GaussRule> = OnceLock::new();
static RULE8: OnceLock<GaussRule> = OnceLock::new();
static RULE16: OnceLock<GaussRule> = OnceLock::new();

/// Cached rule for the orders the area engine uses.
pub fn cached_rule(n: usize) -> &'static GaussRule {
    match n {
        4 => RULE4.get_or_init(|| legendre_rule(4)),
        8 => RULE8.get_or_init(|| legendre_rule(8)),
        16 => RULE16.get_or_init(|| legendre_rule(16)),
        _ => panic!("no cached rule of order {n}"),
    }
}

// 15-point Kronrod extension of the 7-point Gauss rule. Abscissae are the
// nonnegative half; the rule is symmetric.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// One panel of the embedded 7/15 pair.
#[derive(Debug, Clone, Copy)]
pub struct PanelEstimate {
    pub value: Complex64,
    pub error: f64,
    pub resabs: f64,
}

/// Evaluate the Gauss-Kronrod 7/15 pair on [a, b].
pub fn kronrod15<F: FnMut(f64) -> Complex64>(mut f: F, a: f64, b: f64) -> PanelEstimate {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut result_gauss = WG[3] * fc;
    let mut result_kronrod = WGK[7] * fc;
    let mut resabs = WGK[7] * fc.norm();

    let mut samples = [Complex64::new(0.0, 0.0); 15];
    samples[7] = fc;

    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        samples[j] = f1;
        samples[14 - j] = f2;
        let sum = f1 + f2;
        result_kronrod += WGK[j] * sum;
        resabs += WGK[j] * (f1.norm() + f2.norm());
        if j % 2 == 1 {
            result_gauss += WG[j / 2] * sum;
        }
    }

    let mean = result_kronrod * 0.5;
    let mut resasc = WGK[7] * (fc - mean).norm();
    for j in 0..7 {
        resasc += WGK[j] * ((samples[j] - mean).norm() + (samples[14 - j] - mean).norm());
    }

    let value = result_kronrod * half;
    resabs *= half.abs();
    resasc *= half.abs();

    let raw = ((result_kronrod - result_gauss) * half).norm();
    let mut error = raw;
    if resasc != 0.0 && raw != 0.0 {
        error = resasc * (200.0 * raw / resasc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * resabs;
    if floor > f64::MIN_POSITIVE && floor > error {
        error = floor;
    }

    PanelEstimate { value, error, resabs }
}
