import init, { categoryProbabilities, stickHistograms, lcarGrid } from "./pkg/spord_demo.js";

const $ = (id) => document.getElementById(id);
const ROWS = 12;
const COLS = 24;

function showError(target, err) {
  target.textContent = String(err);
  target.className = "out error";
}

function bars(canvas, values, maxValue, labels) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const w = width / values.length;
  values.forEach((v, i) => {
    const h = (height - 20) * (v / maxValue);
    ctx.fillStyle = "#4a7bb7";
    ctx.fillRect(i * w + 4, height - 20 - h, w - 8, h);
    if (labels) {
      ctx.fillStyle = "#222";
      ctx.fillText(labels[i], i * w + w / 2 - 4, height - 5);
    }
  });
}

function updateProbabilities() {
  const lo = Number($("lo").value);
  const hi = Number($("hi").value);
  const shift = Number($("shift").value);
  const j = Math.max(2, Math.min(9, Number($("cats").value)));
  $("lo-v").textContent = lo.toFixed(2);
  $("hi-v").textContent = hi.toFixed(2);
  $("shift-v").textContent = shift.toFixed(2);
  const kappa = new Float64Array(j - 1);
  for (let i = 0; i < j - 1; i++) {
    kappa[i] = j === 2 ? (lo + hi) / 2 : lo + ((hi - lo) * i) / (j - 2);
  }
  try {
    const pi = categoryProbabilities(kappa, shift);
    bars($("probs"), Array.from(pi), 1, Array.from(pi, (_, i) => String(i + 1)));
    $("probs-v").className = "out";
    $("probs-v").textContent = Array.from(pi).map((p) => p.toFixed(3)).join("  ");
  } catch (err) {
    showError($("probs-v"), err);
  }
}

function updateSticks() {
  const j = Number($("stick-cats").value);
  const draws = Number($("stick-draws").value);
  const bins = 20;
  try {
    const out = stickHistograms(j, draws, bins, 7);
    const canvas = $("sticks");
    const ctx = canvas.getContext("2d");
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const panel = canvas.width / j;
    const peak = Math.max(...out.slice(0, j * bins));
    for (let c = 0; c < j; c++) {
      const w = (panel - 10) / bins;
      for (let b = 0; b < bins; b++) {
        const h = (canvas.height - 20) * (out[c * bins + b] / peak);
        ctx.fillStyle = "#6a9f58";
        ctx.fillRect(c * panel + b * w, canvas.height - 20 - h, w - 1, h);
      }
      ctx.fillStyle = "#222";
      ctx.fillText(`share ${c + 1}`, c * panel + 4, canvas.height - 5);
    }
    const kappa = Array.from(out.slice(j * bins)).map((k) => k.toFixed(2));
    $("sticks-v").className = "out";
    $("sticks-v").textContent = `prior mean cut points: ${kappa.join("  ")}`;
  } catch (err) {
    showError($("sticks-v"), err);
  }
}

function colour(v, scale) {
  const t = Math.max(-1, Math.min(1, v / scale));
  const r = t > 0 ? 255 : Math.round(255 * (1 + t));
  const b = t < 0 ? 255 : Math.round(255 * (1 - t));
  const g = Math.round(255 * (1 - Math.abs(t)));
  return `rgb(${r},${g},${b})`;
}

function updateField() {
  const sigma = Number($("sigma").value);
  const lambda = Number($("lambda").value);
  const seed = Math.max(0, Number($("seed").value) | 0);
  $("sigma-v").textContent = sigma.toFixed(2);
  $("lambda-v").textContent = lambda.toFixed(2);
  try {
    const out = lcarGrid(ROWS, COLS, sigma, lambda, seed);
    const theta = out.slice(0, ROWS * COLS);
    const moran = out[ROWS * COLS];
    const scale = Math.max(...theta.map(Math.abs)) || 1;
    const canvas = $("field");
    const ctx = canvas.getContext("2d");
    const cw = canvas.width / COLS;
    const ch = canvas.height / ROWS;
    for (let r = 0; r < ROWS; r++) {
      for (let c = 0; c < COLS; c++) {
        ctx.fillStyle = colour(theta[r * COLS + c], scale);
        ctx.fillRect(c * cw, r * ch, cw, ch);
      }
    }
    $("field-v").className = "out";
    $("field-v").textContent = `Moran's I = ${moran.toFixed(3)}, max |effect| = ${scale.toFixed(2)}`;
  } catch (err) {
    showError($("field-v"), err);
  }
}

await init();
$("status").textContent = "";
for (const id of ["lo", "hi", "shift", "cats"]) $(id).addEventListener("input", updateProbabilities);
$("stick-run").addEventListener("click", updateSticks);
for (const id of ["sigma", "lambda", "seed"]) $(id).addEventListener("input", updateField);
updateProbabilities();
updateSticks();
updateField();
