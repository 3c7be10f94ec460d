/**
 * Workbench UI - DOM wiring over the pure modules.
 *
 * Three panes: the query composer (canvas state + SVG preview), the
 * ranked-result explorer (threshold slider, breakdown, neighborhood
 * diagram), and the label-review queue. A network panel mirrors the API
 * client's request log so it is always visible which slider moves hit
 * the service and which were answered from the client-side cache.
 */

import { ApiClient, ApiError } from './api.js';
import {
  addIndicator, canRun, canvasToDsl, emptyCanvas, removeIndicator,
  setCountry, setMode, setName, setOrg, setRadius, setThreshold, setWeight,
  targetForLine, validateCanvas, type QueryCanvasState,
} from './canvas.js';
import { QueryError } from './dsl.js';
import { ResultController, selectedEntry, visibleRows } from './results.js';
import { startReview, submitSentence, toggleLabel, type ReviewState } from './review.js';
import { neighborhoodSvg, queryCanvasSvg } from './render.js';
import { buildHash, parseHash } from './url.js';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, cls?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls !== undefined) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function labeled(text: string, input: HTMLElement): HTMLLabelElement {
  const wrap = el('label', 'field');
  wrap.append(el('span', 'field-name', text), input);
  return wrap;
}

export function mount(root: HTMLElement): void {
  let api: ApiClient | null = null;
  let canvas: QueryCanvasState = emptyCanvas('untitled');
  let controller: ResultController | null = null;
  let review: ReviewState | null = null;

  root.innerHTML = '';
  const banner = el('div', 'banner hidden');
  const connectPane = el('section', 'pane connect');
  const composerPane = el('section', 'pane composer');
  const resultsPane = el('section', 'pane results');
  const reviewPane = el('section', 'pane review');
  const logPane = el('section', 'pane netlog');
  root.append(banner, connectPane, composerPane, resultsPane, reviewPane, logPane);

  const showError = (message: string): void => {
    banner.textContent = message;
    banner.classList.remove('hidden');
  };
  const clearError = (): void => banner.classList.add('hidden');

  // -- connection ------------------------------------------------------------

  const baseInput = el('input');
  baseInput.value = localStorage.getItem('workbench.base') ?? 'http://127.0.0.1:8000';
  const tokenInput = el('input');
  tokenInput.type = 'password';
  tokenInput.value = localStorage.getItem('workbench.token') ?? '';
  const connectBtn = el('button', undefined, 'Connect');
  connectPane.append(labeled('Service URL', baseInput), labeled('Token', tokenInput), connectBtn);

  connectBtn.addEventListener('click', () => {
    localStorage.setItem('workbench.base', baseInput.value);
    localStorage.setItem('workbench.token', tokenInput.value);
    api = new ApiClient(baseInput.value.replace(/\/$/, ''), tokenInput.value);
    controller = new ResultController(api);
    clearError();
    renderAll();
    void restoreFromHash();
  });

  // -- composer ----------------------------------------------------------------

  const nameInput = el('input');
  const chipList = el('div', 'chips');
  const categoryInput = el('input');
  categoryInput.placeholder = 'C1';
  const weightInput = el('input');
  weightInput.type = 'number';
  weightInput.step = '0.1';
  weightInput.value = '1';
  const addChipBtn = el('button', undefined, 'Add indicator');
  const countryInput = el('input');
  const orgInput = el('input');
  const modeSelect = el('select');
  for (const m of ['individual', 'neighborhood']) {
    const opt = el('option', undefined, m) as HTMLOptionElement;
    opt.value = m;
    modeSelect.append(opt);
  }
  const radiusInput = el('input');
  radiusInput.type = 'number';
  radiusInput.min = '1';
  radiusInput.step = '1';
  const thresholdInput = el('input');
  thresholdInput.type = 'range';
  thresholdInput.min = '0';
  thresholdInput.max = '1';
  thresholdInput.step = '0.05';
  const thresholdValue = el('span', 'value');
  const runBtn = el('button', 'run', 'Run query');
  const dslPreview = el('pre', 'dsl');
  const canvasSvg = el('div', 'canvas-svg');
  const problemsBox = el('ul', 'problems');

  composerPane.append(
    labeled('Name', nameInput),
    chipList,
    labeled('Category', categoryInput),
    labeled('Weight', weightInput),
    addChipBtn,
    labeled('Country filter', countryInput),
    labeled('Organization filter', orgInput),
    labeled('Mode', modeSelect),
    labeled('Radius', radiusInput),
    labeled('Threshold', thresholdInput),
    thresholdValue,
    runBtn,
    problemsBox,
    dslPreview,
    canvasSvg,
  );

  nameInput.addEventListener('input', () => updateCanvas(setName(canvas, nameInput.value)));
  addChipBtn.addEventListener('click', () => {
    const category = categoryInput.value.trim();
    if (category === '') return;
    updateCanvas(addIndicator(canvas, category, Number(weightInput.value)));
    categoryInput.value = '';
  });
  countryInput.addEventListener('change', () =>
    updateCanvas(setCountry(canvas, countryInput.value.trim() === '' ? null : countryInput.value.trim())));
  orgInput.addEventListener('change', () =>
    updateCanvas(setOrg(canvas, orgInput.value.trim() === '' ? null : orgInput.value.trim())));
  modeSelect.addEventListener('change', () =>
    updateCanvas(setMode(canvas, modeSelect.value === 'neighborhood' ? 'neighborhood' : 'individual')));
  radiusInput.addEventListener('change', () =>
    updateCanvas(setRadius(canvas, Number(radiusInput.value))));
  thresholdInput.addEventListener('input', () =>
    updateCanvas(setThreshold(canvas, Number(thresholdInput.value))));

  runBtn.addEventListener('click', () => void runQuery());

  function updateCanvas(next: QueryCanvasState): void {
    canvas = next;
    renderComposer();
  }

  function renderComposer(): void {
    nameInput.value = canvas.name;
    chipList.innerHTML = '';
    const problems = validateCanvas(canvas);
    canvas.indicators.forEach((chip, i) => {
      const chipEl = el('span', 'chip');
      const broken = problems.some((p) => p.target.kind === 'chip' && p.target.index === i);
      if (broken) chipEl.classList.add('invalid');
      chipEl.append(el('b', undefined, chip.category));
      const w = el('input', 'chip-weight') as HTMLInputElement;
      w.type = 'number';
      w.step = '0.1';
      w.value = String(chip.weight);
      w.addEventListener('change', () => updateCanvas(setWeight(canvas, i, Number(w.value))));
      const x = el('button', 'chip-remove', 'x');
      x.addEventListener('click', () => updateCanvas(removeIndicator(canvas, i)));
      chipEl.append(w, x);
      chipList.append(chipEl);
    });
    modeSelect.value = canvas.mode;
    radiusInput.value = String(canvas.radius);
    radiusInput.disabled = canvas.mode !== 'neighborhood';
    thresholdInput.value = String(canvas.threshold);
    thresholdValue.textContent = canvas.threshold.toFixed(2);
    runBtn.disabled = api === null || !canRun(canvas);
    problemsBox.innerHTML = '';
    for (const p of problems) {
      const where = p.target.kind === 'chip' ? `chip ${p.target.index + 1}` : p.target.kind;
      problemsBox.append(el('li', undefined, `${where}: ${p.message}`));
    }
    dslPreview.textContent = canvas.indicators.length > 0 ? canvasToDsl(canvas) : '';
    canvasSvg.innerHTML = canvas.indicators.length > 0 ? queryCanvasSvg(canvas) : '';
  }

  async function runQuery(): Promise<void> {
    if (api === null || controller === null) return;
    clearError();
    try {
      await controller.run(canvas);
      const view = controller.view!;
      location.hash = buildHash({ queryId: view.queryId, threshold: view.activeThreshold });
      renderResults();
    } catch (err) {
      if (err instanceof ApiError) {
        const detail = err.detail as { line?: number; message?: string } | string | null;
        const message = typeof detail === 'object' && detail !== null && detail.message !== undefined
          ? detail.message : String(err.message);
        showError(message);
        if (typeof detail === 'object' && detail !== null && typeof detail.line === 'number') {
          const target = targetForLine(canvas, detail.line);
          if (target !== null && target.kind === 'chip') {
            chipList.children[target.index]?.classList.add('invalid');
          }
        }
      } else if (err instanceof QueryError) {
        showError(err.message);
      } else {
        showError(String(err));
      }
    } finally {
      renderLog();
    }
  }

  // -- results -------------------------------------------------------------------

  const resultsMeta = el('div', 'meta');
  const resultSlider = el('input');
  resultSlider.type = 'range';
  resultSlider.min = '0';
  resultSlider.max = '1';
  resultSlider.step = '0.05';
  const resultSliderValue = el('span', 'value');
  const resultsTable = el('table');
  const breakdownBox = el('div', 'breakdown');
  const neighborhoodBox = el('div', 'neighborhood');
  resultsPane.append(resultsMeta, labeled('Threshold', resultSlider),
                     resultSliderValue, resultsTable, breakdownBox, neighborhoodBox);

  resultSlider.addEventListener('change', () => {
    void (async () => {
      if (controller?.view == null) return;
      try {
        await controller.setThreshold(Number(resultSlider.value));
        const view = controller.view!;
        location.hash = buildHash({ queryId: view.queryId, threshold: view.activeThreshold });
      } catch (err) {
        if ((err as Error).name !== 'AbortError') showError(String(err));
      }
      renderResults();
      renderLog();
    })();
  });

  function renderResults(): void {
    const view = controller?.view ?? null;
    resultsTable.innerHTML = '';
    breakdownBox.innerHTML = '';
    neighborhoodBox.innerHTML = '';
    if (view === null) {
      resultsMeta.textContent = 'No query has been run.';
      return;
    }
    resultsMeta.textContent =
      `${view.queryId} "${view.queryName}" mode ${view.mode} on graph v${view.graphVersion}`;
    resultSlider.value = String(view.activeThreshold);
    resultSliderValue.textContent = view.activeThreshold.toFixed(2);

    const head = el('tr');
    for (const h of ['score', 'subject', 'seed', 'gate']) head.append(el('th', undefined, h));
    resultsTable.append(head);
    visibleRows(view).forEach((entry, i) => {
      const row = el('tr', view.selected === i ? 'selected' : undefined);
      row.append(
        el('td', 'score', entry.score.toFixed(4)),
        el('td', undefined, entry.subject.join(', ')),
        el('td', undefined, entry.seed),
        el('td', undefined, entry.gate_failure ?? ''),
      );
      row.addEventListener('click', () => {
        controller!.selectRow(i);
        renderResults();
      });
      resultsTable.append(row);
    });

    const entry = selectedEntry(view);
    if (entry !== null) {
      const list = el('ul');
      for (const item of entry.breakdown) {
        const status = item.matched
          ? `matched by ${item.matched_by}${item.timestamp !== null ? ` at ${item.timestamp}` : ''}`
          : 'unmatched';
        list.append(el('li', item.matched ? 'hit' : 'miss',
                       `${item.category} (w ${item.weight}): ${status}`));
      }
      breakdownBox.append(el('h3', undefined, 'Breakdown'), list);
      neighborhoodBox.innerHTML = neighborhoodSvg(entry);
    }
  }

  async function restoreFromHash(): Promise<void> {
    const state = parseHash(location.hash);
    if (state === null || api === null || controller === null) return;
    try {
      await controller.open(state.queryId, state.threshold);
      renderResults();
    } catch (err) {
      showError(err instanceof ApiError ? `query ${state.queryId}: ${err.message}` : String(err));
    }
    renderLog();
  }

  window.addEventListener('hashchange', () => {
    const state = parseHash(location.hash);
    const view = controller?.view ?? null;
    if (state === null) return;
    if (view !== null && view.queryId === state.queryId) {
      void controller!.setThreshold(state.threshold).then(() => {
        renderResults();
        renderLog();
      });
    } else {
      void restoreFromHash();
    }
  });

  // -- review ---------------------------------------------------------------------

  const docInput = el('textarea');
  docInput.rows = 4;
  const classifyBtn = el('button', undefined, 'Classify');
  const reviewList = el('div', 'sentences');
  const reviewStatus = el('div', 'review-status');
  reviewPane.append(labeled('Document', docInput), classifyBtn, reviewStatus, reviewList);

  classifyBtn.addEventListener('click', () => {
    void (async () => {
      if (api === null) return;
      clearError();
      try {
        review = startReview(await api.classify(docInput.value));
        renderReview();
      } catch (err) {
        showError(err instanceof ApiError ? err.message : String(err));
      }
      renderLog();
    })();
  });

  function renderReview(): void {
    reviewList.innerHTML = '';
    if (review === null) return;
    reviewStatus.textContent = review.corpusSize !== null
      ? `${review.submissions} submitted; corpus now ${review.corpusSize} snippets`
      : `${review.submissions} submitted`;
    review.sentences.forEach((sentence, si) => {
      const card = el('div', 'sentence');
      card.append(el('p', undefined, sentence.text));
      const labels = el('div', 'labels');
      for (const score of sentence.labels) {
        const btn = el('button', 'label');
        if (sentence.selected.includes(score.category)) btn.classList.add('on');
        btn.textContent = `${score.category} ${(score.probability * 100).toFixed(0)}%`;
        btn.addEventListener('click', () => {
          const { state, blocked } = toggleLabel(review!, si, score.category);
          review = state;
          if (blocked) {
            reviewStatus.textContent = 'a snippet carries at most 3 labels';
          }
          renderReview();
          if (blocked) reviewStatus.classList.add('blocked');
          else reviewStatus.classList.remove('blocked');
        });
        labels.append(btn);
      }
      const submit = el('button', 'submit', 'Submit corrections');
      submit.addEventListener('click', () => {
        void (async () => {
          if (api === null || review === null) return;
          try {
            review = await submitSentence(api, review, si);
            renderReview();
          } catch (err) {
            showError(err instanceof ApiError ? err.message : String(err));
          }
          renderLog();
        })();
      });
      card.append(labels, submit);
      reviewList.append(card);
    });
  }

  // -- network log ------------------------------------------------------------------

  function renderLog(): void {
    logPane.innerHTML = '';
    logPane.append(el('h3', undefined, 'Network'));
    const list = el('ol');
    for (const entry of api?.log ?? []) {
      list.append(el('li', undefined, `${entry.method} ${entry.path} -> ${entry.status}`));
    }
    logPane.append(list);
  }

  function renderAll(): void {
    renderComposer();
    renderResults();
    renderReview();
    renderLog();
  }

  renderAll();
}
