import init, { tradeoff_demo, noise_preview, verify_dp } from "./pkg/genoshare_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const floats = (text) =>
  new Float64Array(text.split(",").map((s) => s.trim()).filter((s) => s !== "").map(Number));

function show(target, fn) {
  try {
    target.replaceChildren(fn());
  } catch (e) {
    const p = document.createElement("p");
    p.className = "error";
    p.textContent = e instanceof Error ? e.message : String(e);
    target.replaceChildren(p);
  }
}

function table(headers, rows) {
  const t = document.createElement("table");
  t.innerHTML =
    "<tr>" + headers.map((h) => `<th>${h}</th>`).join("") + "</tr>" +
    rows.map((r) => "<tr>" + r.map((c) => `<td>${c}</td>`).join("") + "</tr>").join("");
  return t;
}

// error (solid) and attack AUC (dashed) against log epsilon
function chart(points) {
  const w = 480, h = 200, pad = 30;
  const xs = points.map((p) => Math.log(p.epsilon));
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const sx = (x) => pad + (x1 === x0 ? 0.5 : (x - x0) / (x1 - x0)) * (w - 2 * pad);
  const sy = (y) => h - pad - y * (h - 2 * pad);
  const line = (key, dash) =>
    `<polyline fill="none" stroke="#333" ${dash ? 'stroke-dasharray="4 3"' : ""} points="${points
      .map((p, i) => `${sx(xs[i])},${sy(p[key])}`)
      .join(" ")}"/>`;
  const div = document.createElement("div");
  div.innerHTML =
    `<svg width="${w}" height="${h}">` +
    `<line x1="${pad}" y1="${sy(0)}" x2="${w - pad}" y2="${sy(0)}" stroke="#999"/>` +
    `<line x1="${pad}" y1="${sy(0)}" x2="${pad}" y2="${sy(1)}" stroke="#999"/>` +
    `<text x="4" y="${sy(1) + 4}" font-size="10">1</text><text x="4" y="${sy(0) + 4}" font-size="10">0</text>` +
    line("avg_point_error", false) + line("attack_auc", true) +
    `</svg><small>solid: point error after restoration, dashed: membership attack AUC (x: log epsilon)</small>`;
  return div;
}

function runTradeoff() {
  const points = JSON.parse(tradeoff_demo(num("t-samples"), num("t-snps"), floats($("t-eps").value), num("t-seed")));
  const frag = document.createDocumentFragment();
  frag.append(
    table(
      ["epsilon", "flip p", "raw error", "restored error", "mean error", "attack AUC"],
      points.map((p) => [
        p.epsilon, p.flip_probability.toFixed(4), p.raw_point_error.toFixed(4),
        p.avg_point_error.toFixed(4), p.mean_error.toFixed(4), p.attack_auc.toFixed(3),
      ]),
    ),
    chart(points),
  );
  return frag;
}

function runPreview() {
  const pv = JSON.parse(noise_preview(num("p-eps"), $("p-sem").value, num("p-samples"), num("p-snps"), num("p-seed")));
  const frag = document.createDocumentFragment();
  const info = document.createElement("p");
  info.textContent =
    `flip probability ${pv.flip_probability.toFixed(4)}, ` +
    `bound ${pv.epsilon_upper.toFixed(3)}, flipped ${(100 * pv.flipped_fraction).toFixed(1)}% of bits`;
  const pre = document.createElement("pre");
  pre.className = "bits";
  pre.innerHTML = pv.released
    .map((row, r) =>
      [...row].map((b, c) => (pv.noise[r][c] === "1" ? `<span class="flip">${b}</span>` : b)).join(""))
    .join("\n");
  const note = document.createElement("small");
  note.textContent = "released bits, flipped positions highlighted";
  frag.append(info, pre, note);
  return frag;
}

function runVerify() {
  const v = JSON.parse(verify_dp(num("v-bits"), num("v-p"), floats($("v-q").value)));
  return table(
    ["bits", "max ratio", "observed epsilon", "claimed bound", "passes"],
    [[v.bits, v.max_ratio.toFixed(4), v.epsilon_observed.toFixed(6), v.epsilon_upper.toFixed(6), v.passes]],
  );
}

await init();
$("t-run").onclick = () => show($("t-out"), runTradeoff);
$("p-run").onclick = () => show($("p-out"), runPreview);
$("v-run").onclick = () => show($("v-out"), runVerify);
show($("p-out"), runPreview);
