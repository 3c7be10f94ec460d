/**
 * Test doubles and fixture loading.
 *
 * FakeService stands in for the HTTP layer: routes are matched by
 * "METHOD /path", every call is recorded with its headers and body, and
 * responses can be delayed to exercise cancellation. Fixtures under
 * tests/fixtures are real service responses captured against the repo's
 * scenario graph.
 */

import { readFileSync } from 'node:fs';

export interface RecordedCall {
  method: string;
  url: string;
  headers: Record<string, string>;
  body: string | null;
}

export interface RouteReply {
  status?: number;
  body?: unknown;
  delayMs?: number;
}

type Route = RouteReply | ((call: RecordedCall) => RouteReply);

export class FakeService {
  readonly calls: RecordedCall[] = [];
  private readonly routes = new Map<string, Route>();

  on(method: string, path: string, reply: Route): this {
    this.routes.set(`${method} ${path}`, reply);
    return this;
  }

  /** A fetch-compatible function bound to this fake. */
  get fetch(): typeof fetch {
    return (async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
      const url = String(input);
      const method = init?.method ?? 'GET';
      const path = url.replace(/^https?:\/\/[^/]+/, '');
      const call: RecordedCall = {
        method,
        url,
        headers: Object.fromEntries(Object.entries(init?.headers ?? {})),
        body: typeof init?.body === 'string' ? init.body : null,
      };
      this.calls.push(call);

      const route = this.routes.get(`${method} ${path}`);
      if (route === undefined) {
        throw new Error(`unexpected network call: ${method} ${path}`);
      }
      const reply = typeof route === 'function' ? route(call) : route;
      if (reply.delayMs !== undefined && reply.delayMs > 0) {
        await delay(reply.delayMs, init?.signal ?? null);
      } else if (init?.signal?.aborted) {
        throw abortError();
      }
      return new Response(JSON.stringify(reply.body ?? null), {
        status: reply.status ?? 200,
        headers: { 'Content-Type': 'application/json' },
      });
    }) as typeof fetch;
  }
}

function abortError(): DOMException {
  return new DOMException('The operation was aborted.', 'AbortError');
}

function delay(ms: number, signal: AbortSignal | null): Promise<void> {
  return new Promise((resolve, reject) => {
    if (signal?.aborted) {
      reject(abortError());
      return;
    }
    const timer = setTimeout(() => resolve(), ms);
    signal?.addEventListener('abort', () => {
      clearTimeout(timer);
      reject(abortError());
    });
  });
}

export function loadFixture<T>(name: string): T {
  const url = new URL(`./fixtures/${name}`, import.meta.url);
  return JSON.parse(readFileSync(url, 'utf8')) as T;
}

/** The scenario query exactly as the repo's service tests use it. */
export function scenarioDsl(): string {
  const url = new URL('../../tests/fixtures/query.dsl', import.meta.url);
  return readFileSync(url, 'utf8');
}
