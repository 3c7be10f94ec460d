import { describe, expect, it } from 'vitest';

import { forceLayout, hashIds, mulberry32, type LayoutEdge, type LayoutNode } from '../src/layout.js';

const star: LayoutNode[] = [
  { id: 'query', label: 'q', kind: 'query' },
  { id: 'chip:0', label: 'C1', kind: 'indicator' },
  { id: 'chip:1', label: 'C2', kind: 'indicator' },
  { id: 'chip:2', label: 'C3', kind: 'indicator' },
  { id: 'country', label: 'Freedonia', kind: 'country' },
];
const spokes: LayoutEdge[] = [
  { source: 'query', target: 'chip:0' },
  { source: 'query', target: 'chip:1' },
  { source: 'query', target: 'chip:2' },
  { source: 'query', target: 'country' },
];

describe('hashIds / mulberry32', () => {
  it('hashes are stable and order-insensitive', () => {
    expect(hashIds(['a', 'b', 'c'])).toBe(hashIds(['c', 'a', 'b']));
    expect(hashIds(['a', 'b'])).not.toBe(hashIds(['ab']));
    expect(hashIds(['ab', 'c'])).not.toBe(hashIds(['a', 'bc']));
  });

  it('the generator is deterministic and in [0, 1)', () => {
    const a = mulberry32(42);
    const b = mulberry32(42);
    for (let i = 0; i < 100; i += 1) {
      const v = a();
      expect(v).toBe(b());
      expect(v).toBeGreaterThanOrEqual(0);
      expect(v).toBeLessThan(1);
    }
  });
});

describe('forceLayout', () => {
  it('is deterministic: same graph, same picture', () => {
    const first = forceLayout(star, spokes, 420, 320);
    const second = forceLayout(star, spokes, 420, 320);
    expect(second).toEqual(first);
  });

  it('is a function of the graph, not the array order', () => {
    const shuffled = [star[3]!, star[0]!, star[4]!, star[2]!, star[1]!];
    const byId = new Map(forceLayout(star, spokes, 420, 320).map((n) => [n.id, n]));
    for (const node of forceLayout(shuffled, spokes, 420, 320)) {
      expect(node).toEqual(byId.get(node.id));
    }
  });

  it('keeps every node inside the frame', () => {
    for (const node of forceLayout(star, spokes, 420, 320)) {
      expect(node.x).toBeGreaterThanOrEqual(0);
      expect(node.x).toBeLessThanOrEqual(420);
      expect(node.y).toBeGreaterThanOrEqual(0);
      expect(node.y).toBeLessThanOrEqual(320);
      expect(Number.isFinite(node.x)).toBe(true);
      expect(Number.isFinite(node.y)).toBe(true);
    }
  });

  it('separates nodes instead of stacking them', () => {
    const placed = forceLayout(star, spokes, 420, 320);
    for (let i = 0; i < placed.length; i += 1) {
      for (let j = i + 1; j < placed.length; j += 1) {
        const d = Math.hypot(placed[i]!.x - placed[j]!.x, placed[i]!.y - placed[j]!.y);
        expect(d).toBeGreaterThan(10);
      }
    }
  });

  it('handles empty input and edges to unknown nodes', () => {
    expect(forceLayout([], [], 100, 100)).toEqual([]);
    const lonely = forceLayout(
      [{ id: 'a', label: 'a', kind: 'person' }],
      [{ source: 'a', target: 'ghost' }], 100, 100);
    expect(lonely).toHaveLength(1);
  });

  it('a different graph gets a different seeded start', () => {
    const other = star.map((n) => ({ ...n, id: `${n.id}x` }));
    const a = forceLayout(star, [], 420, 320);
    const b = forceLayout(other, [], 420, 320);
    const moved = a.filter((n, i) => n.x !== b[i]!.x || n.y !== b[i]!.y);
    expect(moved.length).toBeGreaterThan(0);
  });
});
