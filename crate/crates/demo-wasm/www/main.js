// Expects the wasm-bindgen output (`--target web`) in ./pkg.
import init, { selectBatch, batchLogDet, labelNorms } from "./pkg/badge_demo.js";

const canvas = document.getElementById("plot");
const ctx = canvas.getContext("2d");
const stats = document.getElementById("stats");
let points = [];
let picked = [];

// Seeded Park-Miller generator: the initial points and the feature lift are fixed.
function lcg(seed) {
  let s = seed % 2147483647 || 1;
  return () => (s = (s * 48271) % 2147483647) / 2147483647;
}

function gaussianClusters(seed) {
  const rnd = lcg(seed);
  const normal = () => Math.sqrt(-2 * Math.log(rnd() + 1e-12)) * Math.cos(2 * Math.PI * rnd());
  const pts = [];
  const centers = [[-1.5, -0.8], [1.4, -1.0], [0.1, 1.3], [2.0, 1.5]];
  centers.forEach(([cx, cy], c) => {
    const n = 30 + 25 * c;
    for (let i = 0; i < n; i++) pts.push([cx + 0.45 * normal(), cy + 0.45 * normal()]);
  });
  return pts;
}

const toScreen = ([x, y]) => [canvas.width / 2 + x * 90, canvas.height / 2 - y * 90];
const fromScreen = (sx, sy) => [(sx - canvas.width / 2) / 90, (canvas.height / 2 - sy) / 90];

function draw() {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#ddd";
  ctx.beginPath();
  ctx.moveTo(0, canvas.height / 2);
  ctx.lineTo(canvas.width, canvas.height / 2);
  ctx.moveTo(canvas.width / 2, 0);
  ctx.lineTo(canvas.width / 2, canvas.height);
  ctx.stroke();
  ctx.fillStyle = "#357";
  for (const p of points) {
    const [sx, sy] = toScreen(p);
    ctx.fillRect(sx - 2, sy - 2, 4, 4);
  }
  ctx.strokeStyle = "#c53";
  ctx.fillStyle = "#c53";
  ctx.lineWidth = 2;
  picked.forEach((i, order) => {
    const [sx, sy] = toScreen(points[i]);
    ctx.beginPath();
    ctx.arc(sx, sy, 8, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.fillText(String(order + 1), sx + 9, sy - 9);
  });
  ctx.lineWidth = 1;
}

// A linear kernel on raw 2D points has rank 2, so every batch of three or
// more would be singular. Points are lifted with random Fourier features
// (an RBF kernel of width ~0.7) and all methods work on the lifted vectors.
const FEATURES = 64;
const lift = (() => {
  const rnd = lcg(12345);
  const normal = () => Math.sqrt(-2 * Math.log(rnd() + 1e-12)) * Math.cos(2 * Math.PI * rnd());
  const w = Array.from({ length: FEATURES }, () => [normal() / 0.7, normal() / 0.7]);
  const b = Array.from({ length: FEATURES }, () => 2 * Math.PI * rnd());
  const scale = Math.sqrt(2 / FEATURES);
  return ([x, y]) => w.map(([a, c], j) => scale * Math.cos(a * x + c * y + b[j]));
})();

const flat = () => Float64Array.from(points.flatMap(lift));

function runSelection() {
  const k = Number(document.getElementById("k").value);
  const seed = Number(document.getElementById("seed").value);
  const method = document.getElementById("method").value;
  try {
    const emb = flat();
    const t0 = performance.now();
    picked = Array.from(selectBatch(emb, FEATURES, k, method, seed));
    const ms = performance.now() - t0;
    const ld = batchLogDet(emb, FEATURES, Uint32Array.from(picked));
    stats.textContent =
      `${method}: ${picked.length} of ${points.length} points in ${ms.toFixed(2)} ms\n` +
      `log det of batch Gram matrix: ${ld === -Infinity ? "-inf (singular)" : ld.toFixed(4)}`;
  } catch (e) {
    picked = [];
    stats.textContent = String(e.message ?? e);
  }
  draw();
}

function updateNorms() {
  const logits = [...document.querySelectorAll(".logit")].map((el) => Number(el.value));
  const m = Math.max(...logits);
  const ex = logits.map((l) => Math.exp(l - m));
  const s = ex.reduce((a, b) => a + b, 0);
  const probs = Float64Array.from(ex.map((e) => e / s));
  const z2 = Number(document.getElementById("znorm").value);
  const out = document.getElementById("norms");
  try {
    const res = Array.from(labelNorms(probs, z2));
    const pred = res.pop();
    const top = Math.max(...res, 1e-12);
    out.innerHTML = res
      .map((v, y) => {
        const w = Math.round((240 * v) / top);
        const cls = y === pred ? "bar pred" : "bar";
        return `y=${y}  p=${probs[y].toFixed(3)}  |g|^2=${v.toFixed(4)}  <span class="${cls}" style="width:${w}px"></span>`;
      })
      .join("\n");
  } catch (e) {
    out.textContent = String(e.message ?? e);
  }
}

await init();
points = gaussianClusters(7);
draw();
updateNorms();

canvas.addEventListener("click", (ev) => {
  const r = canvas.getBoundingClientRect();
  points.push(fromScreen(ev.clientX - r.left, ev.clientY - r.top));
  picked = [];
  draw();
});
document.getElementById("run").addEventListener("click", runSelection);
document.getElementById("regen").addEventListener("click", () => {
  points = gaussianClusters(Math.floor(Math.random() * 1e9));
  picked = [];
  stats.textContent = "";
  draw();
});
document.getElementById("clear").addEventListener("click", () => {
  points = [];
  picked = [];
  stats.textContent = "";
  draw();
});
document.querySelectorAll(".logit").forEach((el) => el.addEventListener("input", updateNorms));
document.getElementById("znorm").addEventListener("input", updateNorms);
