/**
 * SVG renderers for the two node-link views.
 *
 * Pure string builders: the query canvas as a star around the query node,
 * and a selected result's neighborhood reconstructed from its score
 * breakdown (subject members plus the categories they matched). One fill
 * color per node kind.
 */

import type { RankedEntry } from './api.js';
import type { QueryCanvasState } from './canvas.js';
import { forceLayout, type LayoutEdge, type LayoutNode, type NodeKind } from './layout.js';

export const NODE_PALETTE: Record<NodeKind, string> = {
  person: '#4c78a8',
  indicator: '#f58518',
  country: '#54a24b',
  organization: '#b279a2',
  query: '#2f2f2f',
};

const NODE_RADIUS: Record<NodeKind, number> = {
  person: 16,
  indicator: 13,
  country: 13,
  organization: 13,
  query: 18,
};

export function escapeXml(value: string): string {
  return value
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&apos;');
}

function svgDocument(body: string, width: number, height: number): string {
  return `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
    `width="${width}" height="${height}" role="img">${body}</svg>`;
}

function drawGraph(nodes: LayoutNode[], edges: LayoutEdge[],
                   width: number, height: number): string {
  const placed = forceLayout(nodes, edges, width, height);
  const at = new Map(placed.map((n) => [n.id, n]));
  const parts: string[] = [];

  for (const edge of edges) {
    const a = at.get(edge.source);
    const b = at.get(edge.target);
    if (a === undefined || b === undefined) continue;
    parts.push(`<line x1="${a.x.toFixed(1)}" y1="${a.y.toFixed(1)}" ` +
      `x2="${b.x.toFixed(1)}" y2="${b.y.toFixed(1)}" stroke="#999" stroke-width="1.2"/>`);
    if (edge.label !== undefined) {
      const mx = ((a.x + b.x) / 2).toFixed(1);
      const my = ((a.y + b.y) / 2 - 4).toFixed(1);
      parts.push(`<text x="${mx}" y="${my}" font-size="9" fill="#777" ` +
        `text-anchor="middle">${escapeXml(edge.label)}</text>`);
    }
  }

  for (const node of placed) {
    const r = NODE_RADIUS[node.kind];
    parts.push(`<circle cx="${node.x.toFixed(1)}" cy="${node.y.toFixed(1)}" r="${r}" ` +
      `fill="${NODE_PALETTE[node.kind]}" data-kind="${node.kind}" data-id="${escapeXml(node.id)}"/>`);
    parts.push(`<text x="${node.x.toFixed(1)}" y="${(node.y + r + 11).toFixed(1)}" ` +
      `font-size="10" fill="#333" text-anchor="middle">${escapeXml(node.label)}</text>`);
  }

  return svgDocument(parts.join(''), width, height);
}

/** The composed query as a node-link diagram: chips and filters around the query node. */
export function queryCanvasSvg(state: QueryCanvasState, width = 420, height = 320): string {
  const center = 'query';
  const nodes: LayoutNode[] = [{ id: center, label: state.name, kind: 'query' }];
  const edges: LayoutEdge[] = [];
  state.indicators.forEach((chip, i) => {
    const id = `chip:${i}`;
    const weight = chip.weight === 1 ? '' : ` x${chip.weight}`;
    nodes.push({ id, label: `${chip.category}${weight}`, kind: 'indicator' });
    edges.push({ source: center, target: id });
  });
  if (state.country !== null) {
    nodes.push({ id: 'country', label: state.country, kind: 'country' });
    edges.push({ source: center, target: 'country', label: 'in' });
  }
  if (state.org !== null) {
    nodes.push({ id: 'org', label: state.org, kind: 'organization' });
    edges.push({ source: center, target: 'org', label: 'with' });
  }
  return drawGraph(nodes, edges, width, height);
}

/**
 * A result's neighborhood as witnessed by the match: subject members and
 * the indicator categories credited to them, edges labeled with the
 * matching event's timestamp.
 */
export function neighborhoodSvg(entry: RankedEntry, width = 420, height = 320): string {
  const nodes: LayoutNode[] = [];
  const edges: LayoutEdge[] = [];
  const seen = new Set<string>();

  for (const member of entry.subject) {
    nodes.push({ id: `person:${member}`, label: member, kind: 'person' });
    seen.add(member);
  }
  for (const item of entry.breakdown) {
    if (!item.matched) continue;
    const catId = `cat:${item.category}`;
    if (!seen.has(catId)) {
      nodes.push({ id: catId, label: item.category, kind: 'indicator' });
      seen.add(catId);
    }
    if (item.matched_by !== null) {
      edges.push({
        source: `person:${item.matched_by}`,
        target: catId,
        label: item.timestamp ?? undefined,
      });
    }
  }
  return drawGraph(nodes, edges, width, height);
}
