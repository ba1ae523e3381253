import init, { QuantumDemo, section, section_extent } from "./pkg/bohmchaos_web.js";

const $ = (id) => document.getElementById(id);
const status = (msg) => { $("status").textContent = msg; };

const RES = 120;
const qCanvas = $("q-canvas");
const qCtx = qCanvas.getContext("2d");
let demo = null;
let path = null;

function rebuild() {
  demo?.free();
  demo = new QuantumDemo(Number($("q-eps").value), $("q-state").value === "superposition");
  path = null;
  drawDensity();
}

function toPixel(x, y, half, canvas) {
  return [(x + half) / (2 * half) * canvas.width, (half - y) / (2 * half) * canvas.height];
}

function drawDensity() {
  const t = Number($("q-time").value);
  $("q-time-value").textContent = t.toFixed(1);
  const values = demo.density(t, RES);
  const img = qCtx.createImageData(RES, RES);
  for (let j = 0; j < RES; j++) {
    for (let i = 0; i < RES; i++) {
      const v = values[j * RES + i];
      const k = 4 * ((RES - 1 - j) * RES + i);
      img.data[k] = 255 * Math.sqrt(v);
      img.data[k + 1] = 255 * v;
      img.data[k + 2] = 80 * (1 - v);
      img.data[k + 3] = 255;
    }
  }
  const off = new OffscreenCanvas(RES, RES);
  off.getContext("2d").putImageData(img, 0, 0);
  qCtx.imageSmoothingEnabled = false;
  qCtx.drawImage(off, 0, 0, qCanvas.width, qCanvas.height);

  const half = QuantumDemo.extent();
  const nodes = demo.nodes(t);
  qCtx.fillStyle = "#0ff";
  for (let k = 0; k < nodes.length; k += 2) {
    const [px, py] = toPixel(nodes[k], nodes[k + 1], half, qCanvas);
    qCtx.beginPath();
    qCtx.arc(px, py, 3, 0, 2 * Math.PI);
    qCtx.fill();
  }
  if (path) {
    qCtx.strokeStyle = "#fff";
    qCtx.lineWidth = 1;
    qCtx.beginPath();
    for (let k = 0; k < path.length && path[k] <= t; k += 3) {
      const [px, py] = toPixel(path[k + 1], path[k + 2], half, qCanvas);
      k === 0 ? qCtx.moveTo(px, py) : qCtx.lineTo(px, py);
    }
    qCtx.stroke();
  }
  status(`${nodes.length / 2} nodal points at t = ${t}`);
}

qCanvas.addEventListener("click", (ev) => {
  const half = QuantumDemo.extent();
  const r = qCanvas.getBoundingClientRect();
  const x = ((ev.clientX - r.left) / r.width) * 2 * half - half;
  const y = half - ((ev.clientY - r.top) / r.height) * 2 * half;
  const tEnd = Math.max(Number($("q-time").value), 1);
  try {
    path = demo.trajectory(x, y, tEnd);
    drawDensity();
    status(`trajectory from (${x.toFixed(3)}, ${y.toFixed(3)}) to t = ${tEnd}`);
  } catch (e) {
    status(`trajectory failed: ${e.message}`);
  }
});

const cCanvas = $("c-canvas");
const cCtx = cCanvas.getContext("2d");
let hue = 0;

function sectionFrame() {
  const eps = Number($("c-eps").value);
  const e = Number($("c-energy").value);
  return { eps, e, hx: section_extent(eps, e), hp: Math.sqrt(2 * e) };
}

function clearSection() {
  const { hx, hp } = sectionFrame();
  cCtx.fillStyle = "#fff";
  cCtx.fillRect(0, 0, cCanvas.width, cCanvas.height);
  cCtx.strokeStyle = "#bbb";
  cCtx.beginPath();
  cCtx.ellipse(cCanvas.width / 2, cCanvas.height / 2, cCanvas.width / 2 * 0.95, cCanvas.height / 2 * 0.95, 0, 0, 2 * Math.PI);
  cCtx.stroke();
  status(`section half-widths x ${hx.toFixed(3)}, ẋ ${hp.toFixed(3)}`);
}

cCanvas.addEventListener("click", (ev) => {
  const { eps, e, hx, hp } = sectionFrame();
  const r = cCanvas.getBoundingClientRect();
  const sx = hx / 0.95, sp = hp / 0.95;
  const x = ((ev.clientX - r.left) / r.width) * 2 * sx - sx;
  const px = sp - ((ev.clientY - r.top) / r.height) * 2 * sp;
  try {
    const pts = section(eps, e, x, px, Number($("c-cross").value));
    hue = (hue + 47) % 360;
    cCtx.fillStyle = `hsl(${hue} 70% 40%)`;
    for (let k = 0; k < pts.length; k += 2) {
      const cx = (pts[k] + sx) / (2 * sx) * cCanvas.width;
      const cy = (sp - pts[k + 1]) / (2 * sp) * cCanvas.height;
      cCtx.fillRect(cx, cy, 1.5, 1.5);
    }
    status(`orbit from x = ${x.toFixed(3)}, ẋ = ${px.toFixed(3)}: ${pts.length / 2} crossings`);
  } catch (e) {
    status(`no orbit there: ${e.message}`);
  }
});

await init();
for (const id of ["q-eps", "q-state"]) $(id).addEventListener("change", rebuild);
$("q-time").addEventListener("input", drawDensity);
for (const id of ["c-eps", "c-energy"]) $(id).addEventListener("change", clearSection);
$("c-clear").addEventListener("click", clearSection);
rebuild();
clearSection();
