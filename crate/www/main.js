// Demo page driver. Build the wasm module first:
//   wasm-pack build crates/bevkit-wasm --target web --out-dir ../../www/pkg
// then serve this directory: python3 -m http.server -d www

const $ = (id) => document.getElementById(id);

// World window drawn on every canvas: the BEV grid footprint.
const WORLD = { xMin: -50, xMax: 50, yMin: -26, yMax: 26 };

function toPx(canvas, x, y) {
  const px = ((x - WORLD.xMin) / (WORLD.xMax - WORLD.xMin)) * canvas.width;
  const py = canvas.height - ((y - WORLD.yMin) / (WORLD.yMax - WORLD.yMin)) * canvas.height;
  return [px, py];
}

function drawPolyline(ctx, points, color, { dash = [], width = 2.5 } = {}) {
  if (points.length === 0) return;
  ctx.save();
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.setLineDash(dash);
  ctx.beginPath();
  points.forEach(([x, y], i) => {
    const [px, py] = toPx(ctx.canvas, x, y);
    i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
  });
  ctx.stroke();
  // Arrowless start marker shows orientation.
  const [sx, sy] = toPx(ctx.canvas, points[0][0], points[0][1]);
  ctx.setLineDash([]);
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(sx, sy, 4, 0, 2 * Math.PI);
  ctx.fill();
  ctx.restore();
}

function clear(ctx) {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
}

function fail(el, data) {
  el.innerHTML = `<span class="err">${data.error}</span>`;
  return true;
}

function bindSlider(id) {
  const input = $(id);
  const out = $(`${id}-out`);
  const sync = () => { out.textContent = Number(input.value).toFixed(2); };
  input.addEventListener("input", sync);
  sync();
  return input;
}

function renderDecode(wasm) {
  const data = JSON.parse(wasm.decode_demo(
    Number($("dec-seed").value) >>> 0,
    Number($("dec-lane").value) >>> 0,
    Number($("dec-width").value),
  ));
  const ctx = $("dec-canvas").getContext("2d");
  clear(ctx);
  const readout = $("dec-readout");
  if (data.error) return fail(readout, data);

  const g = data.grid;
  const cellW = (g.cell_size / (WORLD.xMax - WORLD.xMin)) * ctx.canvas.width;
  const cellH = (g.cell_size / (WORLD.yMax - WORLD.yMin)) * ctx.canvas.height;
  ctx.fillStyle = "#80808066";
  for (const [row, col] of data.cells) {
    const x = g.x_min + row * g.cell_size;
    const y = g.y_min + (col + 1) * g.cell_size;
    const [px, py] = toPx(ctx.canvas, x, y);
    ctx.fillRect(px, py, cellW + 0.5, cellH + 0.5);
  }
  drawPolyline(ctx, data.gt, "#1a7f37");
  drawPolyline(ctx, data.decoded, "#d4351c", { dash: [8, 5] });
  readout.textContent =
    `direction ${data.direction} · discrete Frechet ${data.frechet.toFixed(3)} m · ` +
    `${data.cells.length} mask cells`;
}

function renderFuse(wasm) {
  const data = JSON.parse(wasm.fuse_demo(
    Number($("fus-seed").value) >>> 0,
    Number($("fus-mask").value),
    Number($("fus-bez").value),
  ));
  const ctx = $("fus-canvas").getContext("2d");
  clear(ctx);
  const readout = $("fus-readout");
  if (data.error) return fail(readout, data);

  drawPolyline(ctx, data.gt, "#1a7f37", { width: 3.5 });
  drawPolyline(ctx, data.mask, "#d4351c", { dash: [8, 5] });
  drawPolyline(ctx, data.bezier, "#1d70b8", { dash: [3, 4] });
  drawPolyline(ctx, data.fused, "#6f42c1");
  const f = data.frechet;
  readout.innerHTML =
    `<b style="color:#1a7f37">ground truth</b> · ` +
    `<b style="color:#d4351c">mask ${f.mask.toFixed(3)} m</b> · ` +
    `<b style="color:#1d70b8">bezier ${f.bezier.toFixed(3)} m</b> · ` +
    `<b style="color:#6f42c1">fused ${f.fused.toFixed(3)} m</b> (Frechet vs ground truth)`;
}

function renderMetrics(wasm) {
  const data = JSON.parse(wasm.metrics_demo(
    Number($("met-seed").value) >>> 0,
    Number($("met-scenes").value) >>> 0,
    Number($("met-xy").value),
    Number($("met-drop").value),
    Number($("met-edge").value),
    $("met-manip").checked,
  ));
  const readout = $("met-readout");
  const table = $("met-table");
  if (data.error) { table.innerHTML = ""; return fail(readout, data); }

  const names = [
    ["det_l", "DET_l"], ["det_l_ch", "DET_l_ch"], ["det_t", "DET_t"],
    ["top_ll", "TOP_ll"], ["top_lt", "TOP_lt"], ["ols", "OLS"],
  ];
  table.innerHTML =
    "<tr><th>metric</th><th>score ×100</th><th></th></tr>" +
    names.map(([key, label]) => {
      const v = data.report[key];
      const bar = "█".repeat(Math.round(v * 24)).padEnd(24, "░");
      return `<tr><td>${label}</td><td>${(100 * v).toFixed(1)}</td><td>${bar}</td></tr>`;
    }).join("");
  readout.textContent = `${data.scenes} scene(s) scored`;
}

async function main() {
  let wasm;
  try {
    wasm = await import("./pkg/bevkit_wasm.js");
    await wasm.default();
  } catch {
    $("banner").style.display = "block";
    return;
  }

  const wire = (ids, render) => {
    for (const id of ids) {
      $(id).addEventListener("input", () => render(wasm));
    }
    render(wasm);
  };

  bindSlider("dec-width");
  bindSlider("fus-mask");
  bindSlider("fus-bez");
  bindSlider("met-xy");
  bindSlider("met-drop");
  bindSlider("met-edge");

  wire(["dec-seed", "dec-lane", "dec-width"], renderDecode);
  wire(["fus-seed", "fus-mask", "fus-bez"], renderFuse);
  wire(["met-seed", "met-scenes", "met-xy", "met-drop", "met-edge", "met-manip"], renderMetrics);
}

main();
