// Payload shapes exactly as the QA service returns them.
// The client renders these verbatim; it never computes pipeline math.

export interface RouteView {
  target: 'PFD_AGENT' | 'PID_AGENT';
  confidence: number;
  rationale: string;
}

export interface ReActStepView {
  step: number;
  thought: string;
  action: string;
  action_input: string;
  observation: string;
}

export interface CandidateView {
  k: number;
  text: string;
}

export interface SummaryView {
  k: number;
  text: string;
  token_count: number;
}

export interface CallDigestView {
  kind: string;
  key: string;
  prompt_sha256: string;
  response: string;
  latency_ms: number;
}

export interface SelectionView {
  candidates: CandidateView[];
  summaries: SummaryView[];
  validity: number[];
  rank: number[];
  k_star: number;
  answer: string;
  trace: CallDigestView[];
}

export interface FeedbackView {
  scores: Record<string, number>;
  verdict: 'ACCEPT' | 'REVISE';
  critique_text: string;
}

export interface IterationView {
  i: number;
  answer: string;
  selection: SelectionView;
  feedback: FeedbackView;
}

export interface FinalAnswerView {
  answer: string;
  chosen_iteration: number;
  verdict: 'ACCEPT' | 'REVISE';
  composite: number;
  route: RouteView;
  react_trace: ReActStepView[];
  iterations: IterationView[];
}

export interface AskResponse extends FinalAnswerView {
  request_id: string;
  session_id: string;
}

export interface TraceArchiveView {
  request_id: string;
  session_id: string;
  question: string;
  task: string;
  gold_answer: string | null;
  mc_options: string[] | null;
  context: string;
  final: FinalAnswerView;
  calls: CallDigestView[];
  timings: Record<string, number>;
}

export interface TraceResponse {
  session_id: string;
  traces: TraceArchiveView[];
}

export interface HealthView {
  status: string;
  documents: number;
  chunks: number;
  sessions: number;
}

export interface TurnView {
  question: string;
  response: AskResponse;
}
