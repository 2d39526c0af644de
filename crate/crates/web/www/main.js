import init, { calibrate_scene, gp_curve, masked_denoise } from "./pkg/jinv_web.js";

const $ = (id) => document.getElementById(id);
const nums = (s) => s.split(",").map((v) => Number(v.trim())).filter((v) => !Number.isNaN(v));

function draw(canvas, values, w, h) {
  canvas.width = w;
  canvas.height = h;
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(w, h);
  for (let i = 0; i < w * h; i++) {
    const g = Math.round(255 * Math.min(1, Math.max(0, values[i])));
    img.data.set([g, g, g, 255], 4 * i);
  }
  ctx.putImageData(img, 0, 0);
}

function guard(msg, f) {
  return () => {
    msg.textContent = "";
    msg.className = "";
    try {
      f();
    } catch (e) {
      msg.textContent = String(e.message ?? e);
      msg.className = "err";
    }
  };
}

function calibrate() {
  const size = Number($("c-size").value);
  const c = calibrate_scene(size, Number($("c-sigma").value), $("c-kind").value,
    Float64Array.from(nums($("c-values").value)), Number($("c-seed").value));
  draw($("c-clean"), c.clean(), size, size);
  draw($("c-noisy"), c.noisy(), size, size);
  draw($("c-den"), c.denoised(), size, size);
  draw($("c-mix"), c.mixed(), size, size);
  $("c-noisy-cap").textContent = `noisy ${c.noisy_psnr().toFixed(2)} dB`;
  $("c-den-cap").textContent = `masked ${c.denoised_psnr().toFixed(2)} dB`;
  $("c-mix-cap").textContent = `mixed (lambda ${c.lambda().toFixed(2)}) ${c.mixed_psnr().toFixed(2)} dB`;
  const [p, ss, gt] = [c.params(), c.ss_loss(), c.gt_loss()];
  let rows = "<tr><th>value</th><th>self-supervised</th><th>ground truth</th></tr>";
  for (let i = 0; i < p.length; i++) {
    rows += `<tr class="${i === c.best() ? "best" : ""}"><td>${p[i]}</td><td>${ss[i].toFixed(5)}</td><td>${gt[i].toFixed(5)}</td></tr>`;
  }
  $("c-table").innerHTML = rows;
  c.free();
}

function gp() {
  const ls = nums($("g-ls").value);
  const r = gp_curve(Number($("g-side").value), Number($("g-sigma").value), Float64Array.from(ls));
  let rows = "<tr><th>lengthscale</th><th>masked MSE</th><th>optimal MSE</th><th>gap</th></tr>";
  ls.forEach((l, i) => {
    const [a, b] = [r[2 * i], r[2 * i + 1]];
    rows += `<tr><td>${l}</td><td>${a.toFixed(5)}</td><td>${b.toFixed(5)}</td><td>${(a - b).toExponential(2)}</td></tr>`;
  });
  $("g-table").innerHTML = rows;
}

let upload = null;

function loadFile() {
  const file = $("m-file").files[0];
  if (!file) return;
  const im = new Image();
  im.onload = () => {
    const scale = Math.min(1, 128 / Math.max(im.width, im.height));
    const w = Math.max(1, Math.round(im.width * scale));
    const h = Math.max(1, Math.round(im.height * scale));
    const c = document.createElement("canvas");
    c.width = w;
    c.height = h;
    const ctx = c.getContext("2d");
    ctx.drawImage(im, 0, 0, w, h);
    const rgba = ctx.getImageData(0, 0, w, h).data;
    const px = new Float64Array(w * h);
    for (let i = 0; i < w * h; i++) {
      px[i] = (0.299 * rgba[4 * i] + 0.587 * rgba[4 * i + 1] + 0.114 * rgba[4 * i + 2]) / 255;
    }
    upload = { px, w, h };
    draw($("m-in"), px, w, h);
  };
  im.src = URL.createObjectURL(file);
}

function denoise() {
  if (!upload) throw new Error("choose an image first");
  const out = masked_denoise(upload.px, upload.w, upload.h, $("m-kind").value,
    Number($("m-value").value), Number($("m-grid").value));
  draw($("m-out"), out, upload.w, upload.h);
}

await init();
$("c-run").onclick = guard($("c-msg"), calibrate);
$("g-run").onclick = guard($("g-msg"), gp);
$("m-file").onchange = loadFile;
$("m-run").onclick = guard($("m-msg"), denoise);
