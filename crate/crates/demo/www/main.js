import init, { rank_demo, simmap_demo, loss_curve } from "./pkg/vdr_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function guard(f) {
  return () => {
    $("error").textContent = "";
    try {
      f();
    } catch (e) {
      $("error").textContent = String(e.message ?? e);
    }
  };
}

function rank() {
  const modes = JSON.parse(rank_demo(num("r-seed"), num("r-docs"), num("r-noise"), $("r-kind").value));
  const out = $("r-out");
  out.replaceChildren();
  for (const m of modes) {
    const div = document.createElement("div");
    const head = document.createElement("h3");
    head.textContent = `${m.mode}: nDCG@5 ${m.ndcg_at_5.toFixed(3)}, recall@1 ${m.recall_at_1.toFixed(3)}`;
    const table = document.createElement("table");
    for (const q of m.queries) {
      const tr = table.insertRow();
      tr.insertCell().textContent = q.query_id;
      for (const [doc, score] of q.top) {
        const td = tr.insertCell();
        td.textContent = `${doc} ${score.toFixed(3)}`;
        if (doc === q.relevant) td.className = "hit";
      }
    }
    div.append(head, table);
    out.append(div);
  }
}

// diverging blue-white-red over [-1, 1]
function colour(v) {
  const t = Math.max(-1, Math.min(1, v));
  const a = Math.round(255 * (1 - Math.abs(t)));
  return t >= 0 ? [255, a, a] : [a, a, 255];
}

function simmap() {
  const map = JSON.parse(simmap_demo(num("s-seed"), num("s-query"), num("s-noise"), "random"));
  $("s-summary").textContent =
    `${map.query_id} vs ${map.doc_id}: ${map.rows}x${map.cols} patches, MaxSim ${map.score.toFixed(4)}`;
  const holder = $("tokens");
  holder.replaceChildren();
  const scale = 12;
  for (const tok of map.tokens) {
    const canvas = document.createElement("canvas");
    canvas.width = map.cols * scale;
    canvas.height = map.rows * scale;
    const ctx = canvas.getContext("2d");
    tok.similarities.forEach((s, i) => {
      const [r, g, b] = colour(s);
      ctx.fillStyle = `rgb(${r},${g},${b})`;
      ctx.fillRect((i % map.cols) * scale, Math.floor(i / map.cols) * scale, scale, scale);
    });
    ctx.strokeStyle = "#000";
    ctx.strokeRect(tok.col * scale + 0.5, tok.row * scale + 0.5, scale - 1, scale - 1);
    const fig = document.createElement("figure");
    const cap = document.createElement("figcaption");
    cap.textContent = `${tok.text} (${tok.kind}) max ${tok.max.toFixed(2)}`;
    fig.append(canvas, cap);
    holder.append(fig);
  }
}

function plot() {
  const pts = JSON.parse(loss_curve(num("l-neg"), num("l-tau"), 200));
  const canvas = $("l-canvas");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const xs = pts.map((p) => p.s_pos);
  const x0 = xs[0], x1 = xs[xs.length - 1];
  const ymax = Math.max(...pts.map((p) => Math.max(p.loss, -p.d_pos)));
  const px = (x) => ((x - x0) / (x1 - x0)) * (w - 20) + 10;
  const py = (y) => h - 10 - (y / ymax) * (h - 20);
  const line = (key, sign, style) => {
    ctx.beginPath();
    ctx.strokeStyle = style;
    pts.forEach((p, i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, px(p.s_pos), py(sign * p[key])));
    ctx.stroke();
  };
  ctx.strokeStyle = "#aaa";
  ctx.beginPath();
  ctx.moveTo(px(num("l-neg")), 0);
  ctx.lineTo(px(num("l-neg")), h);
  ctx.stroke();
  line("loss", 1, "#c33");
  line("d_pos", -1, "#36c");
  ctx.fillStyle = "#333";
  ctx.fillText("loss (red), -dL/ds_pos (blue); grey line: hardest negative", 14, 14);
}

await init();
$("r-run").onclick = guard(rank);
$("s-run").onclick = guard(simmap);
$("l-run").onclick = guard(plot);
guard(rank)();
guard(simmap)();
guard(plot)();
