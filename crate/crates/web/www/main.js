import init, {
  quadratic, quadratic_endpoint_errors, rotation, oscillator, oscillator_regime, census, bundled_spec,
} from "./pkg/nml_web.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#d62728", "#1f77b4", "#2ca02c"];

function fit(points, canvas, pad = 24) {
  let [x0, x1, y0, y1] = [Infinity, -Infinity, Infinity, -Infinity];
  for (const [x, y] of points) {
    x0 = Math.min(x0, x); x1 = Math.max(x1, x);
    y0 = Math.min(y0, y); y1 = Math.max(y1, y);
  }
  const sx = (canvas.width - 2 * pad) / (x1 - x0 || 1);
  const sy = (canvas.height - 2 * pad) / (y1 - y0 || 1);
  return ([x, y]) => [pad + (x - x0) * sx, canvas.height - pad - (y - y0) * sy];
}

function polyline(ctx, pts, color, dots) {
  ctx.strokeStyle = ctx.fillStyle = color;
  ctx.beginPath();
  pts.forEach(([x, y], i) => (i ? ctx.lineTo(x, y) : ctx.moveTo(x, y)));
  ctx.stroke();
  if (dots) pts.forEach(([x, y]) => ctx.fillRect(x - 2, y - 2, 4, 4));
}

// Flat arrays hold six numbers per step: three (x, y) pairs.
function split(flat) {
  const series = [[], [], []];
  for (let i = 0; i < flat.length; i += 6) {
    for (let s = 0; s < 3; s++) series[s].push([flat[i + 2 * s], flat[i + 2 * s + 1]]);
  }
  return series;
}

function drawPaths() {
  const field = $("field").value;
  const eta = +$("eta").value, steps = +$("steps").value;
  $("eta-out").value = eta.toFixed(2);
  $("steps-out").value = steps;
  const canvas = $("paths-canvas"), ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  try {
    const flat = field === "quadratic" ? quadratic(eta, steps, 1, 1) : rotation(eta, steps);
    const series = split(flat);
    const map = fit(series.flat(), canvas);
    series.forEach((s, i) => polyline(ctx, s.map(map), COLORS[i], i === 0));
    const last = series.map((s) => s[s.length - 1]);
    const dist = (a, b) => Math.hypot(a[0] - b[0], a[1] - b[1]);
    let info;
    if (field === "quadratic") {
      const [flow, modified] = quadratic_endpoint_errors(eta, steps, 1, 1);
      info = `endpoint distance to gradient flow ${flow.toExponential(2)}, to modified flow ${modified.toExponential(2)}`;
    } else {
      const r = last.map((p) => Math.hypot(p[0], p[1]));
      info = `radii after ${steps} steps: discrete ${r[0].toFixed(4)}, flow ${r[1].toFixed(4)}, modified ${r[2].toFixed(4)}; ` +
        `discrete to modified ${dist(last[0], last[2]).toExponential(2)}`;
    }
    $("paths-info").textContent = info;
    $("paths-info").className = "";
  } catch (e) {
    $("paths-info").textContent = e.message;
    $("paths-info").className = "err";
  }
}

function drawOscillator() {
  const gamma = +$("gamma").value, omega = +$("omega").value, tEnd = 20, n = 800;
  $("gamma-out").value = gamma.toFixed(2);
  $("omega-out").value = omega.toFixed(2);
  const canvas = $("osc-canvas"), ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const xs = oscillator(gamma, omega, tEnd, n);
  const pts = Array.from(xs, (x, k) => [(k * tEnd) / n, x]);
  const map = fit([...pts, [0, -1], [0, 1]], canvas);
  ctx.strokeStyle = "#aaa";
  ctx.beginPath();
  const [ax, ay] = map([0, 0]), [bx] = map([tEnd, 0]);
  ctx.moveTo(ax, ay); ctx.lineTo(bx, ay); ctx.stroke();
  polyline(ctx, pts.map(map), COLORS[1], false);
  $("regime").textContent = `regime: ${oscillator_regime(gamma, omega)}`;
}

function loadPreset() {
  $("spec").value = bundled_spec($("preset").value) ?? "";
  runCensus();
}

function runCensus() {
  try {
    $("census-out").textContent = census($("spec").value);
    $("census-out").className = "";
  } catch (e) {
    $("census-out").textContent = e.message;
    $("census-out").className = "err";
  }
}

await init();
for (const id of ["field", "eta", "steps"]) $(id).addEventListener("input", drawPaths);
for (const id of ["gamma", "omega"]) $(id).addEventListener("input", drawOscillator);
$("preset").addEventListener("change", loadPreset);
$("count").addEventListener("click", runCensus);
drawPaths();
drawOscillator();
loadPreset();
