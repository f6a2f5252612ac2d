//! Min-pooling over 2×2 windows: the earliest spike in each window wins.

/// 2×2 min-pool with stride 2. Odd trailing rows/columns are dropped,
/// which is what the bundled convolutional presets assume (their
/// parameter counts only line up with floor-divided pooling shapes).
pub const POOL_WINDOW: usize = 2;

/// Forward tape: the flat input index that won each window, `None` when
/// the whole window was silent.
#[derive(Debug, Clone)]
pub struct PoolTape {
    pub argmin: Vec<Option<u32>>,
    pub in_shape: (usize, usize, usize),
    pub out_shape: (usize, usize, usize),
}

pub fn out_shape(in_shape: (usize, usize, usize)) -> (usize, usize, usize) {
    let (c, h, w) = in_shape;
    (c, h / POOL_WINDOW, w / POOL_WINDOW)
}

/// Entrywise window minimum; `+∞` only if every window entry is silent.
pub fn forward(z_in: &[f64], in_shape: (usize, usize, usize)) -> (Vec<f64>, PoolTape) {
    let (c, h, w) = in_shape;
    debug_assert_eq!(z_in.len(), c * h * w);
    let (co, ho, wo) = out_shape(in_shape);
    let mut out = vec![f64::INFINITY; co * ho * wo];
    let mut argmin = vec![None; co * ho * wo];
    for ch in 0..c {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = f64::INFINITY;
                let mut best_idx = None;
                for dy in 0..POOL_WINDOW {
                    for dx in 0..POOL_WINDOW {
                        let iy = oy * POOL_WINDOW + dy;
                        let ix = ox * POOL_WINDOW + dx;
                        let idx = (ch * h + iy) * w + ix;
                        let v = z_in[idx];
                        if v < best {
                            best = v;
                            best_idx = Some(idx as u32);
                        }
                    }
                }
                let o = (ch * ho + oy) * wo + ox;
                out[o] = best;
                argmin[o] = best_idx;
            }
        }
    }
    (
        out,
        PoolTape {
            argmin,
            in_shape,
            out_shape: (co, ho, wo),
        },
    )
}

/// Route each output gradient to the input that won its window.
pub fn backward(tape: &PoolTape, g_out: &[f64]) -> Vec<f64> {
    let (c, h, w) = tape.in_shape;
    let mut g_in = vec![0.0; c * h * w];
    for (o, win) in tape.argmin.iter().enumerate() {
        if let Some(idx) = win {
            g_in[*idx as usize] += g_out[o];
        }
    }
    g_in
}
