/**
 * URL hash <-> view state.
 *
 * Everything needed to reopen an investigation travels in the fragment:
 * the query id and the active threshold. Pasting the link replays the
 * same view through GET /queries/{id}?threshold=x.
 */

export interface HashState {
  queryId: string;
  threshold: number;
}

export function buildHash(state: HashState): string {
  const params = new URLSearchParams();
  params.set('q', state.queryId);
  params.set('t', String(state.threshold));
  return `#${params.toString()}`;
}

export function parseHash(hash: string): HashState | null {
  const raw = hash.startsWith('#') ? hash.slice(1) : hash;
  if (raw === '') return null;
  const params = new URLSearchParams(raw);
  const queryId = params.get('q');
  const t = params.get('t');
  if (queryId === null || queryId === '' || t === null) return null;
  const threshold = Number(t);
  if (!Number.isFinite(threshold) || threshold < 0 || threshold > 1) return null;
  return { queryId, threshold };
}
