// Test fixtures are the REAL golden payloads from the service test suite,
// so the client types and renderers can never drift from the wire format.

import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';

import type { AskResponse, TraceArchiveView, TraceResponse } from '../src/types';

const GOLDEN = join(dirname(fileURLToPath(import.meta.url)), '..', '..', 'tests', 'golden');

function load<T>(name: string): T {
  return JSON.parse(readFileSync(join(GOLDEN, name), 'utf-8')) as T;
}

export const askResponse = (): AskResponse => load<AskResponse>('service_ask_response.json');
export const archiveTurn1 = (): TraceArchiveView => load<TraceArchiveView>('ask_archive.json');
export const archiveTurn2 = (): TraceArchiveView => load<TraceArchiveView>('ask2_archive.json');

export const traceResponse = (): TraceResponse => {
  const one = archiveTurn1();
  const two = archiveTurn2();
  return { session_id: one.session_id, traces: [one, two] };
};

export function jsonResponse(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}
