import init, { mu_map, gate_trajectory, phase_offset_curve } from './pkg/fastgate_web.js';

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

const MAP = { aMin: -0.05, aMax: 0.3, aN: 70, qMin: 0.0, qMax: 1.0, qN: 180 };

function axes(ctx, w, h, pad, xr, yr, xl, yl) {
  ctx.strokeStyle = '#888';
  ctx.fillStyle = '#444';
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillText(`${xl}: ${xr[0].toFixed(2)} .. ${xr[1].toFixed(2)}`, pad, h - 6);
  ctx.fillText(`${yl}: ${yr[0].toExponential(1)} .. ${yr[1].toExponential(1)}`, pad, 12);
}

function line(ctx, xs, ys, xr, yr, box, colour) {
  const [x0, y0, w, h] = box;
  ctx.strokeStyle = colour;
  ctx.beginPath();
  let started = false;
  xs.forEach((x, i) => {
    if (!Number.isFinite(ys[i])) return;
    const px = x0 + ((x - xr[0]) / (xr[1] - xr[0])) * w;
    const py = y0 + h - ((ys[i] - yr[0]) / (yr[1] - yr[0])) * h;
    started ? ctx.lineTo(px, py) : ctx.moveTo(px, py);
    started = true;
  });
  ctx.stroke();
}

function drawMap() {
  const phi = num('map-phi');
  const mu = mu_map(MAP.aMin, MAP.aMax, MAP.aN, MAP.qMin, MAP.qMax, MAP.qN, phi);
  const c = $('map');
  const ctx = c.getContext('2d');
  ctx.clearRect(0, 0, c.width, c.height);
  const pad = 20;
  const cw = (c.width - 2 * pad) / MAP.qN;
  const ch = (c.height - 2 * pad) / MAP.aN;
  let lo = Infinity, hi = -Infinity;
  for (const v of mu) if (Number.isFinite(v)) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  for (let i = 0; i < MAP.aN; i++) {
    for (let j = 0; j < MAP.qN; j++) {
      const v = mu[i * MAP.qN + j];
      if (Number.isFinite(v)) {
        // log scale, red above 1 and blue below
        const t = Math.log(v);
        const s = Math.min(1, Math.abs(t) / Math.log(3));
        const k = Math.round(255 * (1 - s));
        ctx.fillStyle = t >= 0 ? `rgb(255,${k},${k})` : `rgb(${k},${k},255)`;
      } else {
        ctx.fillStyle = '#ddd';
      }
      ctx.fillRect(pad + j * cw, c.height - pad - (i + 1) * ch, cw + 0.5, ch + 0.5);
    }
  }
  axes(ctx, c.width, c.height, pad, [MAP.qMin, MAP.qMax], [MAP.aMin, MAP.aMax], 'q', 'a');
  $('map-out').textContent = `mu ranges ${lo.toFixed(3)} .. ${hi.toFixed(3)}; grey points are unstable`;
}

function drawTrajectory() {
  $('tr-out').textContent = 'running...';
  setTimeout(() => {
    try {
      const d = JSON.parse(gate_trajectory(num('tr-q'), num('tr-n'), num('tr-b')));
      const c = $('traj');
      const ctx = c.getContext('2d');
      ctx.clearRect(0, 0, c.width, c.height);
      const pad = 20;
      const xr = [d.time[0], d.time[d.time.length - 1]];
      const m = Math.max(...d.ion1.map(Math.abs), ...d.ion2.map(Math.abs));
      const yr = [-m, m];
      const box = [pad, pad, c.width - 2 * pad, c.height - 2 * pad];
      line(ctx, d.time, d.ion1, xr, yr, box, '#c0392b');
      line(ctx, d.time, d.ion2, xr, yr, box, '#2471a3');
      axes(ctx, c.width, c.height, pad, xr, yr, 'time / secular periods', 'displacement / x0');
      $('tr-out').textContent =
        `tau = ${d.gate.tau.map((t) => t.toFixed(4)).join(', ')}, n = ${d.gate.n}, mu = ${d.mu.toFixed(4)}\n` +
        `infidelity: closed form ${d.gate.infidelity.toExponential(3)}, trajectories ${d.oracle_infidelity.toExponential(3)}`;
    } catch (e) {
      $('tr-out').textContent = `error: ${e.message ?? e}`;
    }
  }, 10);
}

function drawPhase() {
  $('ph-out').textContent = 'running...';
  setTimeout(() => {
    try {
      const d = JSON.parse(phase_offset_curve(num('ph-mu'), num('ph-n'), num('ph-b'), 81));
      const c = $('phase');
      const ctx = c.getContext('2d');
      ctx.clearRect(0, 0, c.width, c.height);
      const pad = 20;
      const logs = d.infidelity.map((v) => Math.log10(Math.max(v, 1e-30)));
      const yr = [Math.min(...logs), 0];
      const xr = [d.offsets[0], d.offsets[d.offsets.length - 1]];
      line(ctx, d.offsets, logs, xr, yr, [pad, pad, c.width - 2 * pad, c.height - 2 * pad], '#1e8449');
      axes(ctx, c.width, c.height, pad, xr, yr, 'RF phase offset / rad', 'log10 infidelity');
      $('ph-out').textContent =
        `q = ${d.q.toFixed(4)}, ideal gate infidelity ${d.gate.infidelity.toExponential(3)}, ` +
        `at +-pi/4: ${d.infidelity[0].toExponential(3)}, ${d.infidelity[d.infidelity.length - 1].toExponential(3)}`;
    } catch (e) {
      $('ph-out').textContent = `error: ${e.message ?? e}`;
    }
  }, 10);
}

await init();
$('map-run').onclick = drawMap;
$('tr-run').onclick = drawTrajectory;
$('ph-run').onclick = drawPhase;
drawMap();
