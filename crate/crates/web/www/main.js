import init, { Demo } from "./pkg/qedlab_web.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function demo() {
  const rates = [$("c1").value, $("c2").value]
    .flatMap((s) => s.split(",").map(Number));
  return new Demo(new Float64Array(rates), num("beta"), num("theta"));
}

// Draws columns `ys` of a row-major table against column `x`.
function plot(canvas, rows, width, x, ys, shade) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, pad = 30;
  ctx.clearRect(0, 0, W, H);
  const count = rows.length / width;
  const col = (k, j) => rows[k * width + j];
  let x0 = Infinity, x1 = -Infinity, y0 = Infinity, y1 = -Infinity;
  for (let k = 0; k < count; k++) {
    x0 = Math.min(x0, col(k, x)); x1 = Math.max(x1, col(k, x));
    for (const j of ys) { y0 = Math.min(y0, col(k, j)); y1 = Math.max(y1, col(k, j)); }
  }
  if (y1 === y0) { y1 += 1; y0 -= 1; }
  const px = (v) => pad + (v - x0) / (x1 - x0) * (W - 2 * pad);
  const py = (v) => H - pad - (v - y0) / (y1 - y0) * (H - 2 * pad);
  if (shade !== undefined) {
    ctx.fillStyle = "#eee";
    for (let k = 1; k < count; k++) {
      if (col(k, shade) === 0) ctx.fillRect(px(col(k - 1, x)), pad, px(col(k, x)) - px(col(k - 1, x)), H - 2 * pad);
    }
  }
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  if (y0 < 0 && y1 > 0) { ctx.moveTo(pad, py(0)); ctx.lineTo(W - pad, py(0)); }
  ctx.stroke();
  ys.forEach((j, i) => {
    ctx.strokeStyle = COLORS[i % COLORS.length];
    ctx.beginPath();
    for (let k = 0; k < count; k++) {
      const f = k === 0 ? "moveTo" : "lineTo";
      ctx[f](px(col(k, x)), py(col(k, j)));
    }
    ctx.stroke();
  });
  ctx.fillStyle = "#000";
  ctx.fillText(`${y1.toFixed(2)}`, 2, pad);
  ctx.fillText(`${y0.toFixed(2)}`, 2, H - pad);
  ctx.fillText(`${x0.toFixed(1)}`, pad, H - 10);
  ctx.fillText(`${x1.toFixed(1)}`, W - pad - 20, H - 10);
}

function guarded(f) {
  return () => {
    $("status").textContent = "";
    try { f(); } catch (e) { $("status").textContent = String(e.message ?? e); }
  };
}

await init();

// Rows: t, x1, x2, q1, q2, up. Shaded intervals are server downtimes.
$("runQueue").onclick = guarded(() => {
  const rows = demo().queuePath(num("n"), $("policy").value, num("qh"), num("qh") / 500, num("seed"));
  plot($("queue"), rows, 6, 0, [1, 2, 3, 4], 5);
});

// Rows: t, x1, x2.
$("runDiffusion").onclick = guarded(() => {
  const every = Math.max(1, Math.round(num("dh") / num("dt") / 1000));
  const rows = demo().diffusionPath(num("dh"), num("dt"), every, num("seed"));
  plot($("diffusion"), rows, 3, 0, [1, 2]);
});

// Rows: x1, V, u1, u2; only V is drawn.
$("runValue").onclick = guarded(() => {
  const rows = demo().valueSlice(num("alpha"), num("cost"), num("m"), 8, num("h"));
  plot($("value"), rows, 4, 0, [1]);
});
