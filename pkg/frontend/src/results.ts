/**
 * Ranked-result view state and the threshold refilter rule.
 *
 * The controller caches the full sorted result list the service returned
 * and tracks the threshold that list was fetched at (`cacheFloor`). Moving
 * the slider to x >= cacheFloor is answered purely from the cache - no
 * request; the cache is complete for that range by the ranker's sort
 * contract. Moving below the floor refetches at x (aborting any superseded
 * in-flight fetch) and lowers the floor. Rows are never reordered, only
 * filtered.
 */

import type { ApiClient, QueryJob, RankedEntry } from './api.js';
import { canvasToDsl, type QueryCanvasState } from './canvas.js';

export interface ResultView {
  queryId: string;
  queryName: string;
  mode: string;
  graphVersion: number;
  cache: RankedEntry[];
  cacheFloor: number;
  activeThreshold: number;
  selected: number | null; // index into visibleRows
}

/** Displayed rows: cached rows at or above the active threshold, order kept. */
export function visibleRows(view: ResultView): RankedEntry[] {
  return view.cache.filter((entry) => entry.score >= view.activeThreshold);
}

export function selectedEntry(view: ResultView): RankedEntry | null {
  if (view.selected === null) return null;
  return visibleRows(view)[view.selected] ?? null;
}

function viewFromJob(job: QueryJob): ResultView {
  return {
    queryId: job.id,
    queryName: job.name,
    mode: job.mode,
    graphVersion: job.graph_version,
    cache: job.results,
    cacheFloor: job.threshold,
    activeThreshold: job.threshold,
    selected: null,
  };
}

export class ResultController {
  view: ResultView | null = null;
  private inflight: AbortController | null = null;
  private generation = 0;

  constructor(private readonly api: ApiClient) {}

  /** Serialize the canvas, POST it, and cache the ranked list. */
  async run(canvas: QueryCanvasState): Promise<ResultView> {
    if (canvas.indicators.length === 0) {
      throw new Error('cannot run an empty canvas');
    }
    this.cancel();
    const job = await this.api.postQuery(canvasToDsl(canvas));
    this.view = viewFromJob(job);
    return this.view;
  }

  /** Reopen a shared investigation from its query id (URL restore). */
  async open(queryId: string, threshold?: number): Promise<ResultView> {
    this.cancel();
    const job = await this.api.getQuery(queryId, threshold);
    this.view = viewFromJob(job);
    return this.view;
  }

  /**
   * Move the threshold slider. Pure refilter when x is at or above the
   * cached floor; otherwise refetch at x, superseding any in-flight fetch.
   */
  async setThreshold(x: number): Promise<ResultView> {
    const view = this.view;
    if (view === null) throw new Error('no results to refilter');
    if (x >= view.cacheFloor) {
      this.cancel();
      this.view = { ...view, activeThreshold: x, selected: null };
      return this.view;
    }
    this.cancel();
    const controller = new AbortController();
    this.inflight = controller;
    this.generation += 1;
    const generation = this.generation;
    const job = await this.api.getQuery(view.queryId, x, controller.signal);
    if (generation !== this.generation) {
      // A later call superseded this one while it was in flight.
      return this.view!;
    }
    this.inflight = null;
    this.view = {
      ...view,
      graphVersion: job.graph_version,
      cache: job.results,
      cacheFloor: x,
      activeThreshold: x,
      selected: null,
    };
    return this.view;
  }

  selectRow(index: number | null): ResultView {
    const view = this.view;
    if (view === null) throw new Error('no results to select from');
    const rows = visibleRows(view);
    const selected = index !== null && index >= 0 && index < rows.length ? index : null;
    this.view = { ...view, selected };
    return this.view;
  }

  private cancel(): void {
    if (this.inflight !== null) {
      this.inflight.abort();
      this.inflight = null;
      this.generation += 1;
    }
  }
}
