import init, { TriageDemo } from "./pkg/povtriage_wasm.js";

const $ = (id) => document.getElementById(id);
let demo = null;

function status(msg) { $("status").textContent = msg; }

// Let the status text paint before a blocking call.
const later = (f) => new Promise((ok) => setTimeout(() => ok(f()), 20));

async function generate() {
  status("generating corpus and fitting...");
  try {
    demo?.free();
    demo = await later(() => new TriageDemo(Number($("n").value), Number($("seed").value)));
    const s = demo.summary();
    $("summary").textContent =
      `${s.households} households, ${s.surveyed} surveyed, ${s.verified} verified ` +
      `(${(100 * s.underreporting_rate).toFixed(1)}% underreport), model ${s.model}, formula ${s.formula_version}`;
    status("ready");
    rerank();
  } catch (e) {
    status(`error: ${e.message ?? e}`);
  }
}

function rerank() {
  if (!demo) return;
  const v = (id) => Number($(id).value);
  for (const id of ["w_prob", "w_discrepancy", "w_proximity", "tau"]) $(`${id}_v`).textContent = $(id).value;
  let view;
  try {
    view = demo.rank(v("w_prob"), v("w_discrepancy"), v("w_proximity"), v("tau"), 30);
  } catch (e) {
    $("rankinfo").textContent = e.message ?? String(e);
    $("ranked").tBodies[0].replaceChildren();
    return;
  }
  $("rankinfo").textContent = `${view.total} surveyed households, ${view.faded} outside the band (shown faded, last)`;
  const rows = view.records.map((r, i) => {
    const tr = document.createElement("tr");
    if (r.faded) tr.className = "faded";
    const cells = [i + 1, r.household_id, r.p_underreport.toFixed(3),
      r.income_discrepancy.toFixed(0), r.distance_from_line.toFixed(0), r.score.toFixed(3)];
    for (const c of cells) {
      const td = document.createElement("td");
      td.textContent = c;
      tr.append(td);
    }
    return tr;
  });
  $("ranked").tBodies[0].replaceChildren(...rows);
}

async function evaluate() {
  if (!demo) return;
  status("running grouped cross-validation...");
  try {
    const c = await later(() => demo.evaluate($("task").value, $("model").value));
    const pct = (x) => (x == null ? "n/a" : (100 * x).toFixed(1) + "%");
    $("curveinfo").textContent =
      `${c.task} / ${c.model}: ${c.n_rows} rows, prevalence ${pct(c.prevalence)}; ` +
      `precision at 10/20/30% flagged ${c.precision_at.map(pct).join(" / ")}`;
    draw(c);
    status("ready");
  } catch (e) {
    status(`error: ${e.message ?? e}`);
  }
}

function draw(c) {
  const W = 420, H = 260, pad = 30;
  const x = (f) => pad + f * (W - 2 * pad);
  const y = (p) => H - pad - p * (H - 2 * pad);
  const pts = c.points.filter((p) => p.precision != null).sort((a, b) => a.flagged - b.flagged);
  const line = pts.map((p) => `${x(p.flagged).toFixed(1)},${y(p.precision).toFixed(1)}`).join(" ");
  $("curve").innerHTML =
    `<line x1="${pad}" y1="${y(0)}" x2="${W - pad}" y2="${y(0)}" stroke="#999"/>` +
    `<line x1="${pad}" y1="${y(0)}" x2="${pad}" y2="${y(1)}" stroke="#999"/>` +
    `<line x1="${x(0)}" y1="${y(c.prevalence)}" x2="${x(1)}" y2="${y(c.prevalence)}" stroke="#c66" stroke-dasharray="4"/>` +
    `<polyline fill="none" stroke="#36c" stroke-width="2" points="${line}"/>` +
    `<text x="${W / 2}" y="${H - 6}" text-anchor="middle">proportion flagged</text>` +
    `<text x="10" y="${H / 2}" transform="rotate(-90 10 ${H / 2})" text-anchor="middle">precision</text>`;
}

await init();
$("generate").addEventListener("click", generate);
$("evaluate").addEventListener("click", evaluate);
for (const id of ["w_prob", "w_discrepancy", "w_proximity", "tau"]) $(id).addEventListener("input", rerank);
generate();
