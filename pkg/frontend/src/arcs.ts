/**
 * Limb rendering geometry: a limb is drawn as a circular arc of the
 * streamed curvature and a fixed arc length, starting at the origin and
 * tangent to +x.  Pure math, no canvas here.
 */

export interface Point {
  x: number;
  y: number;
}

/** Sample an arc of curvature kappa (1/m) and the given length (m). */
export function arcPoints(kappa: number, arcLength: number, n = 32): Point[] {
  if (!(arcLength > 0) || n < 2) {
    throw new Error("arcLength must be positive and n at least 2");
  }
  const pts: Point[] = [];
  for (let i = 0; i < n; i++) {
    const s = arcLength * (i / (n - 1)); // fraction first: exact endpoints
    if (kappa === 0) {
      pts.push({ x: s, y: 0 });
    } else {
      const theta = kappa * s;
      pts.push({ x: Math.sin(theta) / kappa, y: (1 - Math.cos(theta)) / kappa });
    }
  }
  return pts;
}
