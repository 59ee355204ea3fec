import init, { DemoScene, sweep_l_ep } from "./pkg/pointmask_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

let scene = null;
let points = [];
let lastMask = null;

function showValues() {
  for (const id of ["noise", "blob", "l_ep", "l_dp", "alpha", "r", "sweep-noise"]) {
    $(`${id}-v`).textContent = $(id).value;
  }
}

// Draws a gray RGBA image with optional overlays onto a canvas, scaled up.
function paint(canvas, rgba, w, h, layers) {
  const px = new Uint8ClampedArray(rgba);
  for (const { bits, color, alpha } of layers) {
    for (let i = 0; i < w * h; i++) {
      if (!bits[i]) continue;
      for (let c = 0; c < 3; c++) {
        px[4 * i + c] = Math.round(px[4 * i + c] * (1 - alpha) + color[c] * alpha);
      }
    }
  }
  const off = new OffscreenCanvas(w, h);
  off.getContext("2d").putImageData(new ImageData(px, w, h), 0, 0);
  const ctx = canvas.getContext("2d");
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
  return ctx;
}

function outline(bits, w, h) {
  const edge = new Uint8Array(w * h);
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      const i = y * w + x;
      if (!bits[i]) continue;
      const inside = (xx, yy) => xx >= 0 && yy >= 0 && xx < w && yy < h && bits[yy * w + xx];
      if (!inside(x - 1, y) || !inside(x + 1, y) || !inside(x, y - 1) || !inside(x, y + 1)) edge[i] = 1;
    }
  }
  return edge;
}

function newScene() {
  scene = new DemoScene(BigInt(num("seed")), num("targets"), num("noise"), num("blob"));
  points = [];
  runPmg();
}

function runPmg() {
  const w = scene.width(), h = scene.height();
  const canvas = $("scene");
  const layers = [];
  let stats = "Click a target to add a point.";
  lastMask = null;
  let boxes = [];
  if (points.length) {
    const out = scene.generate(Uint32Array.from(points.flat()), num("l_ep"), num("l_dp"), num("alpha"));
    lastMask = out.mask;
    boxes = Array.from(out.boxes);
    layers.push({ bits: lastMask, color: [60, 200, 100], alpha: 0.55 });
    stats = `${points.length} point(s), ${lastMask.reduce((a, b) => a + b, 0)} mask px, IoU vs GT ${(out.iou * 100).toFixed(2)}%`;
  }
  if ($("show-gt").checked) layers.push({ bits: outline(scene.gt(), w, h), color: [255, 0, 255], alpha: 0.9 });
  const ctx = paint(canvas, scene.image_rgba(), w, h, layers);
  const s = canvas.width / w;
  if ($("show-boxes").checked) {
    ctx.strokeStyle = "#fc0";
    ctx.lineWidth = 1;
    for (let i = 0; i < boxes.length; i += 4) {
      const [l, t, r, b] = boxes.slice(i, i + 4);
      ctx.strokeRect(l * s + 0.5, t * s + 0.5, (r - l + 1) * s - 1, (b - t + 1) * s - 1);
    }
  }
  ctx.fillStyle = "#f33";
  for (const [x, y] of points) ctx.fillRect(x * s + s / 2 - 2, y * s + s / 2 - 2, 4, 4);
  $("pmg-stats").textContent = stats;
  runUpdate();
}

function runUpdate() {
  const w = scene.width(), h = scene.height();
  const initial = lastMask ?? new Uint8Array(w * h);
  const out = scene.update(initial, Uint32Array.from(points.flat()), num("r"), num("false-n"), BigInt(num("pred-seed")));
  const gray = scene.image_rgba();
  paint($("pred"), gray, w, h, [{ bits: out.prediction, color: [230, 60, 60], alpha: 0.7 }]);
  paint($("hybrid"), gray, w, h, [{ bits: out.hybrid, color: [60, 200, 100], alpha: 0.7 }]);
  $("upd-stats").textContent =
    `erased ${out.erased} component(s), retrieved ${out.retrieved} px\n` +
    `IoU prediction ${(out.iou_prediction * 100).toFixed(2)}%, merged ${(out.iou_hybrid * 100).toFixed(2)}%`;
  if (!points.length) $("upd-stats").textContent += " (no points: every component is erased)";
}

function runSweep() {
  const values = Array.from({ length: 30 }, (_, i) => i + 1);
  const ious = sweep_l_ep(BigInt(num("seed")), num("sweep-n"), num("sweep-noise"), Uint32Array.from(values));
  const canvas = $("curve");
  const ctx = canvas.getContext("2d");
  const m = { l: 45, r: 15, t: 15, b: 35 };
  const W = canvas.width - m.l - m.r, H = canvas.height - m.t - m.b;
  const X = (v) => m.l + ((v - 1) / (values.length - 1)) * W;
  const Y = (v) => m.t + (1 - v) * H;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#ccc";
  ctx.fillStyle = "#444";
  ctx.font = "11px system-ui";
  for (let t = 0; t <= 1.0001; t += 0.25) {
    ctx.beginPath(); ctx.moveTo(m.l, Y(t)); ctx.lineTo(m.l + W, Y(t)); ctx.stroke();
    ctx.fillText(t.toFixed(2), 8, Y(t) + 4);
  }
  for (let v = 5; v <= 30; v += 5) ctx.fillText(String(v), X(v) - 6, m.t + H + 16);
  ctx.fillText("l_ep", m.l + W / 2 - 8, canvas.height - 4);
  ctx.strokeStyle = "#2a6";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ious.forEach((v, i) => (i ? ctx.lineTo(X(values[i]), Y(v)) : ctx.moveTo(X(values[i]), Y(v))));
  ctx.stroke();
  const best = ious.reduce((bi, v, i) => (v > ious[bi] ? i : bi), 0);
  $("sweep-stats").textContent = `best l_ep ${values[best]} (IoU ${(ious[best] * 100).toFixed(2)}%), l_ep 25: ${(ious[24] * 100).toFixed(2)}%`;
}

function guard(f) {
  return (...args) => {
    try {
      $("status").textContent = "";
      f(...args);
    } catch (e) {
      $("status").textContent = String(e);
    }
  };
}

async function main() {
  await init();
  $("status").textContent = "";
  showValues();
  for (const el of document.querySelectorAll("input")) el.addEventListener("input", showValues);
  for (const id of ["seed", "targets", "noise", "blob"]) $(id).addEventListener("change", guard(newScene));
  for (const id of ["l_ep", "l_dp", "alpha", "show-gt", "show-boxes"]) $(id).addEventListener("input", guard(runPmg));
  for (const id of ["r", "false-n", "pred-seed"]) $(id).addEventListener("input", guard(runUpdate));
  $("new-scene").addEventListener("click", guard(() => { $("seed").value = num("seed") + 1; newScene(); }));
  $("clear").addEventListener("click", guard(() => { points = []; runPmg(); }));
  $("centroids").addEventListener("click", guard(() => {
    const flat = Array.from(scene.labels());
    points = [];
    for (let i = 0; i < flat.length; i += 2) points.push([flat[i], flat[i + 1]]);
    runPmg();
  }));
  $("scene").addEventListener("click", guard((ev) => {
    const rect = ev.target.getBoundingClientRect();
    const x = Math.floor(((ev.clientX - rect.left) / rect.width) * scene.width());
    const y = Math.floor(((ev.clientY - rect.top) / rect.height) * scene.height());
    points.push([x, y]);
    runPmg();
  }));
  $("run-sweep").addEventListener("click", guard(runSweep));
  guard(newScene)();
  guard(runSweep)();
}

main().catch((e) => { $("status").textContent = `Failed to start: ${e}`; });
