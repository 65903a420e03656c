//! WebAssembly bindings for the browser demo in `www/`.
//!
//! The plain functions are usable natively; the `#[wasm_bindgen]` wrappers
//! only convert errors into JS exceptions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use spatial_ordinal::cutpoints::{delta_to_kappa, sticks_to_delta};
use spatial_ordinal::graph::{LcarHyper, SpatialGraph};
use spatial_ordinal::model::category_probs;
use spatial_ordinal::synth::sample_lcar;
use spatial_ordinal::Result;
use wasm_bindgen::prelude::*;

/// Category probabilities for cut points `kappa` and linear shift `shift`.
pub fn probabilities(kappa: &[f64], shift: f64) -> Result<Vec<f64>> {
    Ok(category_probs(kappa, shift)?.1)
}

/// Histograms of the category shares implied by the stick-breaking prior.
///
/// Returns `categories * bins` frequencies, one row of `bins` per category,
/// followed by the `categories - 1` prior mean cut points.
pub fn stick_histograms(categories: usize, draws: usize, bins: usize, seed: u64) -> Result<Vec<f64>> {
    if categories < 2 || bins == 0 || draws == 0 {
        return Err(spatial_ordinal::Error::input(
            "need at least two categories, one bin and one draw",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let betas: Vec<Beta<f64>> = (1..categories)
        .map(|j| Beta::new(1.0, (categories - j) as f64).expect("valid beta parameters"))
        .collect();
    let mut hist = vec![0.0; categories * bins];
    let mut kappa_sum = vec![0.0; categories - 1];
    let mut kept = 0usize;
    for _ in 0..draws {
        let omega: Vec<f64> = betas.iter().map(|b| b.sample(&mut rng)).collect();
        let delta = sticks_to_delta(&omega)?;
        // Extreme draws can leave a share at exactly zero.
        let Ok(kappa) = delta_to_kappa(&delta) else { continue };
        for (j, d) in delta.iter().enumerate() {
            let b = ((d * bins as f64) as usize).min(bins - 1);
            hist[j * bins + b] += 1.0;
        }
        for (s, k) in kappa_sum.iter_mut().zip(kappa) {
            *s += k;
        }
        kept += 1;
    }
    let kept = kept.max(1) as f64;
    hist.iter_mut().for_each(|h| *h /= kept);
    hist.extend(kappa_sum.iter().map(|s| s / kept));
    Ok(hist)
}

/// One LCAR draw on a `rows x cols` grid, followed by its Moran's I.
pub fn lcar_grid(rows: usize, cols: usize, sigma: f64, lambda: f64, seed: u64) -> Result<Vec<f64>> {
    let graph = SpatialGraph::grid(rows, cols)?;
    let hyper = LcarHyper::new(sigma, lambda)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = sample_lcar(&graph, &hyper, &mut rng)?;
    let moran = graph.morans_i(&theta);
    theta.push(moran);
    Ok(theta)
}

fn js(e: spatial_ordinal::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = categoryProbabilities)]
pub fn category_probabilities_js(kappa: &[f64], shift: f64) -> std::result::Result<Vec<f64>, JsError> {
    probabilities(kappa, shift).map_err(js)
}

#[wasm_bindgen(js_name = stickHistograms)]
pub fn stick_histograms_js(
    categories: usize,
    draws: usize,
    bins: usize,
    seed: u32,
) -> std::result::Result<Vec<f64>, JsError> {
    stick_histograms(categories, draws, bins, seed.into()).map_err(js)
}

#[wasm_bindgen(js_name = lcarGrid)]
pub fn lcar_grid_js(
    rows: usize,
    cols: usize,
    sigma: f64,
    lambda: f64,
    seed: u32,
) -> std::result::Result<Vec<f64>, JsError> {
    lcar_grid(rows, cols, sigma, lambda, seed.into()).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probabilities_sum_to_one() {
        let p = probabilities(&[-1.0, 1.0], 1.0).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!(probabilities(&[1.0, -1.0], 0.0).is_err());
    }

    #[test]
    fn stick_histograms_are_normalised() {
        let out = stick_histograms(4, 2000, 10, 1).unwrap();
        assert_eq!(out.len(), 4 * 10 + 3);
        for row in out[..40].chunks(10) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(out[40..].windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn lcar_grid_is_deterministic() {
        let a = lcar_grid(4, 5, 1.0, 0.9, 3).unwrap();
        assert_eq!(a.len(), 21);
        assert_eq!(a, lcar_grid(4, 5, 1.0, 0.9, 3).unwrap());
        assert!(lcar_grid(4, 5, 1.0, 1.5, 3).is_err());
    }
}
