/**
 * Static capture page: consent gate, live key-down/key-up capture into a
 * plain textarea (copy and paste blocked), counters, canonical-format
 * download, and an optional POST to a user-configured collection URL.
 */

import { CaptureSession, exportSession, SOFT_MIN_CHARS } from './session.js'

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id)
  if (!node) throw new Error(`missing element #${id}`)
  return node as T
}

let session: CaptureSession | null = null

function refreshStatus(): void {
  const status = el<HTMLSpanElement>('status')
  if (!session) {
    status.textContent = 'idle'
    return
  }
  const state = session.isStopped ? 'stopped' : 'recording'
  status.textContent =
    `${state}: ${session.eventCount} events, ${session.charCount} characters` +
    (session.droppedKeys ? `, ${session.droppedKeys} unmappable key(s) dropped` : '')
}

function startSession(): void {
  const consent = el<HTMLInputElement>('consent').checked
  if (!consent) {
    banner('Consent is required before any keystrokes are recorded.')
    return
  }
  const prompt = el<HTMLSelectElement>('prompt').value
  const user = el<HTMLInputElement>('user').value
  session = new CaptureSession(prompt, user, true, performance.now())
  el<HTMLTextAreaElement>('editor').value = ''
  el<HTMLTextAreaElement>('editor').focus()
  banner('')
  refreshStatus()
}

function stopSession(): void {
  session?.stop()
  refreshStatus()
}

function banner(message: string): void {
  const node = el<HTMLDivElement>('banner')
  node.textContent = message
  node.style.display = message ? 'block' : 'none'
}

function exportBlob(): void {
  if (!session) {
    banner('No session to export; start one first.')
    return
  }
  if (!session.isStopped) session.stop()
  try {
    const condition = el<HTMLSelectElement>('condition').value === 'assisted' ? 1 : 0
    const result = exportSession(session, condition)
    banner(result.warnings.join(' '))
    const blob = new Blob([result.text], { type: 'text/plain' })
    const a = document.createElement('a')
    a.href = URL.createObjectURL(blob)
    a.download = `${session.sessionId}.kdi`
    a.click()
    URL.revokeObjectURL(a.href)

    const postUrl = el<HTMLInputElement>('post-url').value.trim()
    if (postUrl) {
      fetch(postUrl, { method: 'POST', body: result.text, headers: { 'Content-Type': 'text/plain' } })
        .then((r) => banner(r.ok ? 'Uploaded.' : `Upload failed: HTTP ${r.status}`))
        .catch((err) => banner(`Upload failed: ${err}`))
    }
  } catch (err) {
    banner(String(err instanceof Error ? err.message : err))
  }
  refreshStatus()
}

function wire(): void {
  const editor = el<HTMLTextAreaElement>('editor')
  editor.addEventListener('keydown', (e) => session?.recordDown(e.code, performance.now()))
  editor.addEventListener('keyup', (e) => {
    session?.recordUp(e.code, performance.now())
    refreshStatus()
  })
  for (const blocked of ['paste', 'copy', 'cut', 'drop'] as const) {
    editor.addEventListener(blocked, (e) => {
      e.preventDefault()
      banner(`${blocked} is disabled inside the capture area.`)
    })
  }
  el<HTMLButtonElement>('start').addEventListener('click', startSession)
  el<HTMLButtonElement>('stop').addEventListener('click', stopSession)
  el<HTMLButtonElement>('export').addEventListener('click', exportBlob)
  el<HTMLSpanElement>('softmin').textContent = String(SOFT_MIN_CHARS)

  // Document the platform's actual timer resolution instead of promising
  // sensor-grade precision.
  let delta = 0
  const t0 = performance.now()
  for (;;) {
    const t = performance.now()
    if (t !== t0) {
      delta = t - t0
      break
    }
  }
  el<HTMLSpanElement>('resolution').textContent = `${(delta * 1000).toFixed(0)} us`
}

wire()
refreshStatus()
