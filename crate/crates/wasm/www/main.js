import init, { ecgDemo, hypnogramMetrics, filterResponse } from "./pkg/ecgsleep_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function fmt(v) {
  return v === null || v === undefined ? "n/a" : Number.isInteger(v) ? String(v) : v.toFixed(2);
}

function table(rows) {
  const body = rows.map(([k, v]) => `<tr><th>${k}</th><td>${fmt(v)}</td></tr>`).join("");
  return `<table><tbody>${body}</tbody></table>`;
}

function showError(el, e) {
  el.innerHTML = `<p class="err">${e.message ?? e}</p>`;
}

// Line plot of ys against xs; marks are extra x positions drawn as ticks.
function plot(canvas, xs, ys, { marks = [], yRange = null, color = "#c0392b" } = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 24;
  ctx.clearRect(0, 0, w, h);
  const x0 = xs[0], x1 = xs[xs.length - 1];
  let [lo, hi] = yRange ?? [Math.min(...ys), Math.max(...ys)];
  if (hi <= lo) hi = lo + 1;
  const px = (x) => pad + (w - 2 * pad) * (x - x0) / (x1 - x0 || 1);
  const py = (y) => h - pad - (h - 2 * pad) * (Math.min(Math.max(y, lo), hi) - lo) / (hi - lo);
  ctx.strokeStyle = "#ddd";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#666";
  ctx.font = "11px sans-serif";
  ctx.fillText(hi.toFixed(1), 2, pad + 4);
  ctx.fillText(lo.toFixed(1), 2, h - pad);
  ctx.strokeStyle = color;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(ys[i])) : ctx.moveTo(px(x), py(ys[i]))));
  ctx.stroke();
  ctx.strokeStyle = "#2c3e50";
  for (const m of marks) {
    if (m < x0 || m > x1) continue;
    ctx.beginPath();
    ctx.moveTo(px(m), pad);
    ctx.lineTo(px(m), pad + 8);
    ctx.stroke();
  }
}

function runEcg() {
  try {
    const r = JSON.parse(ecgDemo(num("ecg-seconds"), num("ecg-seed"), num("ecg-noise")));
    const xs = r.signal.map((_, i) => i / r.fs);
    plot($("ecg-plot"), xs, r.signal, { marks: r.peaks });
    $("ecg-out").innerHTML = table([
      ["True beats", r.true_beats],
      ["Detected", r.detected],
      ["Recall", r.recall],
      ["Mean HR (bpm)", r.mean_hr],
      ["SDNN (ms)", r.sdnn],
      ["RMSSD (ms)", r.rmssd],
      ["pNN50 (%)", r.pnn50],
    ]);
  } catch (e) {
    showError($("ecg-out"), e);
  }
}

const STAGE_LEVEL = { W: 4, REM: 3, N1: 2, N2: 1, N3: 0 };

function runHypnogram() {
  try {
    const r = JSON.parse(hypnogramMetrics($("hyp-text").value));
    const xs = r.stages.map((_, i) => i);
    plot($("hyp-plot"), xs, r.stages.map((s) => STAGE_LEVEL[s]), { yRange: [0, 4], color: "#3498db" });
    $("hyp-out").innerHTML = table(r.metrics);
  } catch (e) {
    showError($("hyp-out"), e);
  }
}

function runFilter() {
  try {
    const r = JSON.parse(filterResponse(num("f-low"), num("f-high"), num("f-order"), num("f-fs"), 512));
    plot($("f-plot"), r.freq, r.db, { yRange: [-80, 5], color: "#27ae60" });
    const at = (f) => r.db[r.freq.findIndex((x) => x >= f)];
    $("f-out").innerHTML = table([
      ["Sections", r.sections],
      ["Gain at 10 Hz (dB)", at(10)],
      ["Gain at 60 Hz (dB)", at(60)],
    ]);
  } catch (e) {
    showError($("f-out"), e);
  }
}

await init();
$("status").textContent = "Ready. Everything runs locally in WebAssembly.";
$("ecg-run").onclick = runEcg;
$("hyp-run").onclick = runHypnogram;
$("f-run").onclick = runFilter;
runEcg();
runHypnogram();
runFilter();
