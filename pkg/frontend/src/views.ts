// Pure HTML renderers: service payload in, markup out. Numbers are only
// ever formatted here, never derived — the service owns all scoring math.

import type {
  AskResponse,
  FinalAnswerView,
  IterationView,
  ReActStepView,
  SelectionView,
  TurnView,
} from './types';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&#39;');
}

const fmt = (value: number): string => value.toFixed(2);

export function verdictBadge(verdict: 'ACCEPT' | 'REVISE'): string {
  const cls = verdict === 'ACCEPT' ? 'accept' : 'revise';
  return `<span class="badge ${cls}">${verdict}</span>`;
}

export function candidateTable(selection: SelectionView): string {
  const rows = selection.candidates
    .map((candidate, idx) => {
      const star = candidate.k === selection.k_star ? ' class="winner"' : '';
      const marker = candidate.k === selection.k_star ? ' &#9733;' : '';
      return (
        `<tr${star}><td>${candidate.k}${marker}</td>` +
        `<td>${escapeHtml(candidate.text)}</td>` +
        `<td class="v">${fmt(selection.validity[idx])}</td>` +
        `<td class="r">${fmt(selection.rank[idx])}</td></tr>`
      );
    })
    .join('');
  return (
    '<table class="candidates"><thead>' +
    '<tr><th>k</th><th>candidate</th><th>validity</th><th>rank</th></tr>' +
    `</thead><tbody>${rows}</tbody></table>`
  );
}

export function summaryList(selection: SelectionView): string {
  const items = selection.summaries
    .map((s) => `<li><strong>(${s.k})</strong> ${escapeHtml(s.text)}</li>`)
    .join('');
  return `<ul class="summaries">${items}</ul>`;
}

export function reactStepsView(steps: ReActStepView[]): string {
  const items = steps
    .map((step) => {
      const input = step.action_input ? ` <code>${escapeHtml(step.action_input)}</code>` : '';
      const observation = step.observation
        ? `<div class="observation">${escapeHtml(step.observation)}</div>`
        : '';
      return (
        `<li><div class="thought">${escapeHtml(step.thought)}</div>` +
        `<div class="action">${escapeHtml(step.action)}${input}</div>${observation}</li>`
      );
    })
    .join('');
  return `<ol class="react-steps">${items}</ol>`;
}

export function iterationTimeline(final: FinalAnswerView): string {
  const items = final.iterations
    .map((iteration: IterationView) => {
      const best = iteration.i === final.chosen_iteration ? ' best' : '';
      const feedback = iteration.feedback;
      const critique = feedback.critique_text
        ? `<div class="critique">${escapeHtml(feedback.critique_text)}</div>`
        : '';
      return (
        `<li class="iteration${best}" data-iteration="${iteration.i}">` +
        `<span class="iter-label">i=${iteration.i}</span> ` +
        `${verdictBadge(feedback.verdict)} ` +
        `<span class="composite">composite ${fmt(feedback.scores.composite)}</span>` +
        `<div class="iter-answer">${escapeHtml(iteration.answer)}</div>${critique}</li>`
      );
    })
    .join('');
  return `<ol class="timeline">${items}</ol>`;
}

export function traceView(final: FinalAnswerView): string {
  const iterations = final.iterations
    .map(
      (iteration) =>
        `<section class="iteration-detail"><h4>iteration ${iteration.i}</h4>` +
        candidateTable(iteration.selection) +
        summaryList(iteration.selection) +
        '</section>',
    )
    .join('');
  return (
    '<div class="trace">' +
    `<div class="route">route: ${escapeHtml(final.route.target)} ` +
    `(confidence ${fmt(final.route.confidence)})</div>` +
    `<h4>reasoning steps</h4>${reactStepsView(final.react_trace)}` +
    `<h4>iteration timeline</h4>${iterationTimeline(final)}` +
    iterations +
    '</div>'
  );
}

export function turnView(turn: TurnView): string {
  const response: AskResponse = turn.response;
  return (
    `<article class="turn" data-request="${escapeHtml(response.request_id)}">` +
    `<div class="question">${escapeHtml(turn.question)}</div>` +
    `<div class="answer">${escapeHtml(response.answer)} ${verdictBadge(response.verdict)} ` +
    `<span class="composite">${fmt(response.composite)}</span></div>` +
    `<details class="trace-toggle"><summary>reasoning trace</summary>` +
    `<div class="trace-slot">${traceView(response)}</div></details>` +
    '</article>'
  );
}

export function sessionListView(sessions: string[], active: string): string {
  const items = sessions
    .map((id) => {
      const cls = id === active ? ' class="active"' : '';
      return `<li${cls} data-session="${escapeHtml(id)}">${escapeHtml(id)}</li>`;
    })
    .join('');
  return `<ul class="sessions">${items}</ul>`;
}

export function errorBanner(message: string): string {
  return (
    `<div class="error-banner" role="alert">${escapeHtml(message)} ` +
    '<button class="retry">retry</button></div>'
  );
}
