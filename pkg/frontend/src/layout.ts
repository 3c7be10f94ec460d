/**
 * Deterministic force layout for small node-link diagrams.
 *
 * Positions are a pure function of the node ids, edges, and frame size:
 * the RNG is seeded from the sorted node ids, so the same graph renders
 * identically every time and screenshots are reproducible.
 */

export type NodeKind = 'person' | 'indicator' | 'country' | 'organization' | 'query';

export interface LayoutNode {
  id: string;
  label: string;
  kind: NodeKind;
}

export interface LayoutEdge {
  source: string;
  target: string;
  label?: string;
}

export interface PositionedNode extends LayoutNode {
  x: number;
  y: number;
}

const MARGIN = 28;

/** FNV-1a, good enough to turn a list of ids into a stable 32-bit seed. */
export function hashIds(ids: string[]): number {
  let h = 0x811c9dc5;
  for (const id of [...ids].sort()) {
    for (let i = 0; i < id.length; i += 1) {
      h ^= id.charCodeAt(i);
      h = Math.imul(h, 0x01000193);
    }
    h ^= 0x2e; // separator so ["ab","c"] and ["a","bc"] differ
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** mulberry32: tiny deterministic PRNG over a 32-bit state. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/**
 * Spring-embedder layout: repulsion between all pairs, springs along
 * edges, gentle centering, linear cooling. Runs a fixed number of
 * iterations and clamps into the frame.
 *
 * The simulation runs over nodes in sorted-id order, so the result is a
 * function of the graph alone - permuting the input array moves nothing.
 */
export function forceLayout(
  nodes: LayoutNode[],
  edges: LayoutEdge[],
  width: number,
  height: number,
  iterations = 150,
): PositionedNode[] {
  if (nodes.length === 0) return [];
  const order = [...nodes].sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0));
  const rng = mulberry32(hashIds(order.map((n) => n.id)));
  const cx = width / 2;
  const cy = height / 2;
  const ring = Math.min(width, height) / 2 - MARGIN;

  const xs = new Float64Array(order.length);
  const ys = new Float64Array(order.length);
  order.forEach((_, i) => {
    const angle = (2 * Math.PI * i) / order.length + rng() * 0.5;
    const r = ring * (0.4 + 0.5 * rng());
    xs[i] = cx + r * Math.cos(angle);
    ys[i] = cy + r * Math.sin(angle);
  });

  const index = new Map(order.map((n, i) => [n.id, i]));
  const springs: [number, number][] = [];
  for (const e of edges) {
    const a = index.get(e.source);
    const b = index.get(e.target);
    if (a !== undefined && b !== undefined && a !== b) springs.push([a, b]);
  }

  const area = width * height;
  const k = Math.sqrt(area / order.length) * 0.6;

  for (let step = 0; step < iterations; step += 1) {
    const temp = (1 - step / iterations) * Math.min(width, height) * 0.08;
    const dx = new Float64Array(order.length);
    const dy = new Float64Array(order.length);

    for (let i = 0; i < order.length; i += 1) {
      for (let j = i + 1; j < order.length; j += 1) {
        let vx = xs[i]! - xs[j]!;
        let vy = ys[i]! - ys[j]!;
        let d2 = vx * vx + vy * vy;
        if (d2 < 1e-6) {
          // Coincident nodes: nudge apart along a seeded direction.
          vx = rng() - 0.5;
          vy = rng() - 0.5;
          d2 = vx * vx + vy * vy;
        }
        const d = Math.sqrt(d2);
        const force = (k * k) / d;
        dx[i] = dx[i]! + (vx / d) * force;
        dy[i] = dy[i]! + (vy / d) * force;
        dx[j] = dx[j]! - (vx / d) * force;
        dy[j] = dy[j]! - (vy / d) * force;
      }
    }

    for (const [a, b] of springs) {
      const vx = xs[a]! - xs[b]!;
      const vy = ys[a]! - ys[b]!;
      const d = Math.max(Math.sqrt(vx * vx + vy * vy), 1e-3);
      const force = (d * d) / k;
      dx[a] = dx[a]! - (vx / d) * force;
      dy[a] = dy[a]! - (vy / d) * force;
      dx[b] = dx[b]! + (vx / d) * force;
      dy[b] = dy[b]! + (vy / d) * force;
    }

    for (let i = 0; i < order.length; i += 1) {
      dx[i] = dx[i]! + (cx - xs[i]!) * 0.02;
      dy[i] = dy[i]! + (cy - ys[i]!) * 0.02;
      const d = Math.max(Math.sqrt(dx[i]! * dx[i]! + dy[i]! * dy[i]!), 1e-9);
      const capped = Math.min(d, temp);
      xs[i] = xs[i]! + (dx[i]! / d) * capped;
      ys[i] = ys[i]! + (dy[i]! / d) * capped;
    }
  }

  return nodes.map((node) => {
    const i = index.get(node.id)!;
    return {
      ...node,
      x: clamp(xs[i]!, MARGIN, width - MARGIN),
      y: clamp(ys[i]!, MARGIN, height - MARGIN),
    };
  });
}

const clamp = (v: number, lo: number, hi: number): number =>
  Math.min(Math.max(v, lo), hi);
