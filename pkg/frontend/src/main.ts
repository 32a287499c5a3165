import { ControlApi } from "./api.js";
import { EventLog, renderLine } from "./store.js";
import { EventStreamClient } from "./sse.js";
import type { RunStateDto } from "./types.js";

/**
 * Browser entry point. Expects the markup in ../static/index.html and the
 * control API on the same origin (the API serves this bundle).
 */

const api = new ControlApi("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

let activeRun: string | null = null;
let activeLog: EventLog | null = null;

function appendLogLine(container: HTMLElement, text: string, cls: string) {
  const row = document.createElement("div");
  row.className = `row ${cls}`;
  row.textContent = text;
  container.appendChild(row);
  container.scrollTop = container.scrollHeight;
}

async function refreshRuns() {
  const runs = await api.listRuns();
  const list = el<HTMLElement>("runs");
  list.textContent = "";
  for (const run of runs) {
    const row = document.createElement("div");
    row.className = "row run";
    row.textContent = `${run.run_id}  ${run.agent}  ${run.status}` +
      (run.end_reason ? ` (${run.end_reason})` : "");
    row.onclick = () => void selectRun(run.run_id);
    list.appendChild(row);
  }
}

async function refreshState(runId: string) {
  const state = await api.runState(runId);
  el<HTMLElement>("status").textContent =
    `${state.agent} | ${state.model} | turns ${state.turn_count} | ` +
    `$${state.spend.toFixed(4)} | ${state.status}`;
  renderApproval(state);
}

function renderApproval(state: RunStateDto) {
  const box = el<HTMLElement>("approval");
  box.textContent = "";
  const pending = state.pending_approval;
  if (!pending) return;
  const label = document.createElement("span");
  label.textContent = `${pending.tool_name} ${JSON.stringify(pending.arguments)} `;
  box.appendChild(label);
  for (const decision of ["approve", "deny"] as const) {
    const button = document.createElement("button");
    button.textContent = decision;
    button.onclick = async () => {
      await api.resolveApproval(state.run_id, pending.request_id, decision);
      box.textContent = "";
    };
    box.appendChild(button);
  }
}

async function selectRun(runId: string) {
  activeRun = runId;
  const transcript = el<HTMLElement>("transcript");
  transcript.textContent = "";
  const log = new EventLog();
  activeLog = log;
  log.onEvent((event) => {
    if (activeLog !== log) return;
    const line = renderLine(event);
    appendLogLine(transcript, `[${line.sequence}] ${line.label}: ${line.text}`, event.kind);
    void refreshState(runId);
  });
  const client = new EventStreamClient("", runId, log);
  await refreshState(runId);
  void client.follow().then(() => refreshRuns());
}

function wireControls() {
  el<HTMLButtonElement>("start").onclick = async () => {
    const agent = el<HTMLInputElement>("agent").value || "one_tool_agent";
    const task = el<HTMLInputElement>("task").value;
    if (!task) return;
    const run = await api.createRun(agent, task);
    await refreshRuns();
    await selectRun(run.run_id);
  };
  el<HTMLButtonElement>("interrupt").onclick = async () => {
    if (activeRun) await api.interrupt(activeRun);
  };
  el<HTMLButtonElement>("inject").onclick = async () => {
    const text = el<HTMLInputElement>("message").value;
    if (activeRun && text) await api.injectMessage(activeRun, text);
  };
  el<HTMLButtonElement>("switch").onclick = async () => {
    const name = el<HTMLInputElement>("agent").value;
    if (activeRun && name) await api.switchAgent(activeRun, name);
  };
}

async function boot() {
  wireControls();
  const agents = await api.agents();
  el<HTMLInputElement>("agent").placeholder = agents.join(", ");
  await refreshRuns();
  setInterval(() => void refreshRuns(), 2000);
  setInterval(() => {
    if (activeRun) void refreshState(activeRun);
  }, 1000);
}

void boot();
