import init, { toy_slice, toy_slice_minima, toy_heatmap, separation_trial } from "./pkg/basin_demo.js";

const N = 401;
const D1 = 0.5;
const D2 = 0.005;
const $ = (id) => document.getElementById(id);

function theta1At(i, n) {
  return -1 + (2 * i) / (n - 1);
}

function drawSlice() {
  const theta2 = parseFloat($("theta2").value);
  const r = parseFloat($("r").value);
  $("theta2-val").textContent = theta2.toFixed(4);
  $("r-val").textContent = r.toFixed(3);

  const ys = toy_slice(theta2, D1, D2, r, N);
  const mins = toy_slice_minima(theta2, D1, D2, r, N);
  const c = $("slice");
  const ctx = c.getContext("2d");
  const lo = Math.min(...ys, -4.5);
  const hi = Math.max(...ys, 0.5);
  const px = (i) => (i / (N - 1)) * (c.width - 20) + 10;
  const py = (y) => c.height - 10 - ((y - lo) / (hi - lo)) * (c.height - 20);

  ctx.clearRect(0, 0, c.width, c.height);
  ctx.strokeStyle = "#ddd";
  ctx.beginPath();
  ctx.moveTo(px(0), py(0));
  ctx.lineTo(px(N - 1), py(0));
  ctx.stroke();

  ctx.strokeStyle = "#1f5fa8";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ys.forEach((y, i) => (i ? ctx.lineTo(px(i), py(y)) : ctx.moveTo(px(i), py(y))));
  ctx.stroke();

  ctx.fillStyle = "#c0392b";
  for (const i of mins) {
    ctx.beginPath();
    ctx.arc(px(i), py(ys[i]), 4, 0, 2 * Math.PI);
    ctx.fill();
  }
  $("minima").textContent =
    `${mins.length} local minima: ` +
    Array.from(mins, (i) => `theta1 = ${theta1At(i, N).toFixed(3)} (loss ${ys[i].toFixed(3)})`).join(", ");
}

function drawHeat() {
  const r = parseFloat($("r").value);
  const c = $("heat");
  const nx = c.width / 4;
  const ny = c.height / 4;
  const v = toy_heatmap(D1, D2, r, nx, ny);
  let lo = Infinity;
  let hi = -Infinity;
  for (const x of v) {
    lo = Math.min(lo, x);
    hi = Math.max(hi, x);
  }
  const ctx = c.getContext("2d");
  for (let iy = 0; iy < ny; iy++) {
    for (let ix = 0; ix < nx; ix++) {
      const t = (v[iy * nx + ix] - lo) / (hi - lo || 1);
      const g = Math.round(255 * t);
      ctx.fillStyle = `rgb(${g},${g},${Math.min(255, g + 40)})`;
      ctx.fillRect(ix * 4, (ny - 1 - iy) * 4, 4, 4);
    }
  }
}

function runTrial() {
  const p = parseInt($("p").value, 10);
  const eps = parseFloat($("eps").value);
  const seeds = parseInt($("seeds").value, 10);
  $("status").textContent = "running...";
  // let the status repaint before blocking on wasm
  setTimeout(() => {
    const t0 = performance.now();
    try {
      const m = separation_trial(p, eps, seeds, 0n);
      const rows = ["public_only", "private_only", "mixed"]
        .map((a, i) => `<tr><td>${a}</td><td>${m[i].toPrecision(5)}</td></tr>`)
        .join("");
      $("arms").innerHTML = "<tr><th>arm</th><th>median excess risk</th></tr>" + rows;
      $("status").textContent = `done in ${((performance.now() - t0) / 1000).toFixed(1)} s`;
    } catch (e) {
      $("status").textContent = `error: ${e.message ?? e}`;
    }
  }, 10);
}

await init();
$("status").textContent = "ready";
$("theta2").addEventListener("input", drawSlice);
$("r").addEventListener("input", () => {
  drawSlice();
  drawHeat();
});
$("run").addEventListener("click", runTrial);
drawSlice();
drawHeat();
