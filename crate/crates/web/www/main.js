import init, { butterfly, fermi_contours, ids_curve, energy_range } from "./pkg/bloch_fermi_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const status = $("status");

function report(e) {
  status.textContent = String(e.message ?? e);
  status.className = "err";
}

// Maps data coordinates onto a canvas with a small margin and draws axes.
function frame(canvas, x0, x1, y0, y1) {
  const ctx = canvas.getContext("2d");
  const m = 36;
  const w = canvas.width - 2 * m;
  const h = canvas.height - 2 * m;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(m, m, w, h);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(x0.toFixed(2), m, canvas.height - m + 14);
  ctx.fillText(x1.toFixed(2), m + w - 24, canvas.height - m + 14);
  ctx.fillText(y0.toFixed(2), 2, m + h);
  ctx.fillText(y1.toFixed(2), 2, m + 10);
  const sx = (x) => m + ((x - x0) / (x1 - x0)) * w;
  const sy = (y) => m + h - ((y - y0) / (y1 - y0)) * h;
  return { ctx, sx, sy };
}

function drawButterfly() {
  const pts = butterfly(num("bf-q"), num("bf-n"));
  const { ctx, sx, sy } = frame($("bf"), 0, 1, -4.2, 4.2);
  ctx.strokeStyle = "#1a4c8b";
  ctx.lineWidth = 1.5;
  for (let i = 0; i < pts.length; i += 3) {
    const [f, lo, hi] = [pts[i], pts[i + 1], pts[i + 2]];
    ctx.beginPath();
    ctx.moveTo(sx(f), sy(lo));
    ctx.lineTo(sx(f), sy(Math.max(hi, lo + 0.01)));
    ctx.stroke();
  }
}

let fcRange = [0, 1];

function refreshRange() {
  fcRange = energy_range($("fc-model").value, num("fc-p"), num("fc-q"), 16);
  drawContours();
}

function drawContours() {
  const [lo, hi] = fcRange;
  const e = lo + ((hi - lo) * num("fc-e")) / 1000;
  $("fc-ev").textContent = `E = ${e.toFixed(4)}`;
  const pts = fermi_contours($("fc-model").value, num("fc-p"), num("fc-q"), e, num("fc-n"));
  const { ctx, sx, sy } = frame($("fc"), 0, 1, 0, 1);
  ctx.strokeStyle = "#b3400a";
  ctx.lineWidth = 1.2;
  ctx.beginPath();
  let pen = false;
  for (let i = 0; i < pts.length; i += 2) {
    const [x, y] = [pts[i], pts[i + 1]];
    if (Number.isNaN(x)) {
      pen = false;
      continue;
    }
    // Unwrapped coordinates: draw every translate that meets the unit square.
    const ox = Math.floor(x);
    const oy = Math.floor(y);
    if (!pen) ctx.moveTo(sx(x - ox), sy(y - oy));
    else ctx.lineTo(sx(x - ox), sy(y - oy));
    pen = true;
    // Break the path where a segment crosses a cell wall.
    const nx = pts[i + 2];
    const ny = pts[i + 3];
    if (!Number.isNaN(nx) && (Math.floor(nx) !== ox || Math.floor(ny) !== oy)) {
      ctx.lineTo(sx(nx - ox), sy(ny - oy));
      pen = false;
    }
  }
  ctx.stroke();
}

function drawIds() {
  const pts = ids_curve($("ids-model").value, num("ids-p"), num("ids-q"), 600, num("ids-n"));
  const { ctx, sx, sy } = frame($("ids"), pts[0], pts[pts.length - 2], 0, 1);
  ctx.strokeStyle = "#2a7a2a";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  for (let i = 0; i < pts.length; i += 2) {
    if (i === 0) ctx.moveTo(sx(pts[i]), sy(pts[i + 1]));
    else ctx.lineTo(sx(pts[i]), sy(pts[i + 1]));
  }
  ctx.stroke();
}

function guarded(f) {
  return () => {
    try {
      f();
      status.textContent = "ready";
      status.className = "";
    } catch (e) {
      report(e);
    }
  };
}

init()
  .then(() => {
    $("bf-go").onclick = guarded(drawButterfly);
    $("ids-go").onclick = guarded(drawIds);
    $("fc-e").oninput = guarded(drawContours);
    $("fc-n").onchange = guarded(drawContours);
    for (const id of ["fc-model", "fc-p", "fc-q"]) $(id).onchange = guarded(refreshRange);
    guarded(drawButterfly)();
    guarded(refreshRange)();
    guarded(drawIds)();
  })
  .catch(report);
