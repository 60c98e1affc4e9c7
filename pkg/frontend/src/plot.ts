/** Canvas rendering of a three-axis accelerometer window.
 *
 * The geometry helpers are pure so the scaling maths is unit-testable;
 * draw() is a thin painter over them.
 */

export interface PlotLayout {
  width: number;
  height: number;
  padding: number;
}

export const AXIS_COLORS = ["#d33", "#2a2", "#36c"];
export const AXIS_NAMES = ["x", "y", "z"];

/** Shared value range across the three axes, padded, never degenerate. */
export function valueRange(axes: number[][]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const trace of axes) {
    for (const v of trace) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (!isFinite(lo) || !isFinite(hi)) return [-1, 1];
  if (hi - lo < 1e-9) {
    // constant signal: draw a flat line mid-plot
    return [lo - 1, hi + 1];
  }
  const pad = 0.05 * (hi - lo);
  return [lo - pad, hi + pad];
}

/** Map one trace to canvas pixel coordinates. */
export function tracePoints(
  trace: number[],
  range: [number, number],
  layout: PlotLayout,
): Array<[number, number]> {
  const [lo, hi] = range;
  const w = layout.width - 2 * layout.padding;
  const h = layout.height - 2 * layout.padding;
  const n = trace.length;
  return trace.map((v, i) => {
    const x = layout.padding + (n === 1 ? w / 2 : (i / (n - 1)) * w);
    const y = layout.padding + (1 - (v - lo) / (hi - lo)) * h;
    return [x, y];
  });
}

/** Tick labels in seconds given the sampling rate of the window. */
export function timeTicks(samples: number, rateHz: number, count = 5): Array<{ frac: number; label: string }> {
  const duration = rateHz > 0 ? samples / rateHz : 0;
  const ticks = [];
  for (let i = 0; i < count; i++) {
    const frac = count === 1 ? 0 : i / (count - 1);
    ticks.push({ frac, label: `${(frac * duration).toFixed(2)}s` });
  }
  return ticks;
}

export function draw(canvas: HTMLCanvasElement, axes: number[][], rateHz: number): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const layout: PlotLayout = { width: canvas.width, height: canvas.height, padding: 28 };
  ctx.clearRect(0, 0, layout.width, layout.height);

  const range = valueRange(axes);
  ctx.strokeStyle = "#ccc";
  ctx.strokeRect(
    layout.padding,
    layout.padding,
    layout.width - 2 * layout.padding,
    layout.height - 2 * layout.padding,
  );

  ctx.fillStyle = "#666";
  ctx.font = "11px sans-serif";
  ctx.textAlign = "center";
  for (const tick of timeTicks(axes[0]?.length ?? 0, rateHz)) {
    const x = layout.padding + tick.frac * (layout.width - 2 * layout.padding);
    ctx.fillText(tick.label, x, layout.height - 8);
  }

  axes.forEach((trace, a) => {
    const pts = tracePoints(trace, range, layout);
    ctx.strokeStyle = AXIS_COLORS[a % AXIS_COLORS.length];
    ctx.lineWidth = 1.4;
    ctx.beginPath();
    pts.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
    ctx.stroke();
    ctx.fillStyle = AXIS_COLORS[a % AXIS_COLORS.length];
    ctx.textAlign = "left";
    ctx.fillText(AXIS_NAMES[a % 3], layout.padding + 6 + a * 24, layout.padding - 8);
  });
}
